#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gridshield {

/// A transmission line in the DC model. Bus indices are 0-based internal
/// indices; file formats use 1-based numbering.
struct Branch {
  int from = 0;
  int to = 0;
  /// Series susceptance b = 1/x in per-unit, strictly positive.
  double susceptance = 0.0;
  /// Series conductance, only used to build the AC admittance matrix.
  double conductance = 0.0;

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// Validated bus/branch network.
///
/// Invariants (enforced by validate_case and every parser):
///  - every endpoint is in [0, n_bus) and from != to;
///  - susceptance > 0, conductance >= 0;
///  - the branch graph is connected;
///  - slack_bus is in [0, n_bus).
struct GridCase {
  std::string name;
  int n_bus = 0;
  int slack_bus = 0;
  std::vector<Branch> branches;
  /// Original external bus number of each internal bus.
  std::vector<long> bus_ids;

  friend bool operator==(const GridCase&, const GridCase&) = default;
};

/// Throws ConfigError when an invariant is violated.
void validate_case(const GridCase& grid);

/// Native text format:
///   grid <name> <n_bus> <slack_bus>
///   busid <bus> <external_id>          (optional)
///   branch <from> <to> <b> [<g>]
/// with `#` comments. Duplicate branches are merged by summing
/// susceptances (a warning is appended to `warnings` when non-null).
GridCase parse_native_case(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// Restricted MATPOWER importer: reads only `mpc.baseMVA`, `mpc.bus` and
/// `mpc.branch`. Susceptance is 1/x; out-of-service branches are skipped;
/// the slack is the bus with type 3.
GridCase parse_matpower_case(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// Writes the native format with round-trip precision.
std::string serialize_native_case(const GridCase& grid);

/// Reads `secure <bus>` lines (1-based) and returns 0-based bus indices.
std::vector<int> parse_secure_fragment(std::string_view text);
std::string serialize_secure_fragment(const std::vector<int>& buses);

/// Resolves a case name or path. Bare names ("ieee57", "case57", "path3")
/// are searched in $GRIDSHIELD_CASE_DIR and then in the bundled case
/// directory; `.grid` files parse as native, `.m` files as MATPOWER.
std::filesystem::path resolve_case_path(const std::string& name_or_path);
GridCase load_case(const std::string& name_or_path, std::vector<std::string>* warnings = nullptr);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace gridshield
