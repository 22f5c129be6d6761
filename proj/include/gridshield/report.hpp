#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gridshield {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
/// Throws IoError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Writes through a temporary file and a rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Flat `key = value` text. `#` starts a comment. Throws ParseError.
std::map<std::string, std::string> parse_flat_config(std::string_view text);
std::string serialize_flat_config(const std::map<std::string, std::string>& config);

/// `# key=value ...` line recording a resolved configuration.
std::string config_comment(const std::map<std::string, std::string>& config);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  /// Input path -> SHA-256.
  std::map<std::string, std::string> inputs;
  std::string version;
  std::string seed;
  std::vector<std::string> outputs;
  double wall_clock_seconds = 0.0;
};

std::string manifest_json(const RunManifest& manifest);
/// Reads back the `command` and `config` of a manifest.
RunManifest parse_manifest_json(std::string_view text);

}  // namespace gridshield
