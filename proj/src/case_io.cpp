#include "gridshield/case_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <utility>

#include "gridshield/error.hpp"

namespace gridshield {
namespace {

struct Token {
  std::string_view text;
  int column = 1;  // 1-based
};

std::vector<Token> split_tokens(std::string_view line) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  // strtod accepts the forms MATPOWER files use (e.g. "1e-3", "Inf").
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  return v;
}

std::optional<long> to_long(std::string_view s) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Merges parallel branches (either orientation) in order of first
// appearance, summing susceptance and conductance.
std::vector<Branch> merge_parallel(const std::vector<Branch>& raw, const std::vector<long>& ids,
                                   std::vector<std::string>* warnings) {
  std::map<std::pair<int, int>, size_t> seen;
  std::vector<Branch> merged;
  for (const Branch& br : raw) {
    auto key = std::minmax(br.from, br.to);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, merged.size());
      merged.push_back(br);
      continue;
    }
    Branch& target = merged[it->second];
    target.susceptance += br.susceptance;
    target.conductance += br.conductance;
    if (warnings) {
      warnings->push_back("parallel branch " + std::to_string(ids[br.from]) + "-" +
                          std::to_string(ids[br.to]) + " merged by summing susceptances");
    }
  }
  return merged;
}

bool is_connected(int n_bus, const std::vector<Branch>& branches) {
  if (n_bus == 0) return false;
  std::vector<int> parent(n_bus);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n_bus;
  for (const Branch& br : branches) {
    int a = find(br.from), b = find(br.to);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate_case(const GridCase& grid) {
  if (grid.n_bus < 1) throw ConfigError("case '" + grid.name + "': n_bus must be positive");
  if (grid.slack_bus < 0 || grid.slack_bus >= grid.n_bus) {
    throw ConfigError("case '" + grid.name + "': slack bus out of range");
  }
  if (static_cast<int>(grid.bus_ids.size()) != grid.n_bus) {
    throw ConfigError("case '" + grid.name + "': bus id map has wrong length");
  }
  for (const Branch& br : grid.branches) {
    if (br.from < 0 || br.from >= grid.n_bus || br.to < 0 || br.to >= grid.n_bus) {
      throw ConfigError("case '" + grid.name + "': bus index out of range");
    }
    if (br.from == br.to) throw ConfigError("case '" + grid.name + "': self-loop branch");
    if (!(br.susceptance > 0.0) || !std::isfinite(br.susceptance)) {
      throw ConfigError("case '" + grid.name + "': non-positive susceptance");
    }
    if (!(br.conductance >= 0.0) || !std::isfinite(br.conductance)) {
      throw ConfigError("case '" + grid.name + "': negative conductance");
    }
  }
  if (grid.n_bus > 1 && !is_connected(grid.n_bus, grid.branches)) {
    throw ConfigError("case '" + grid.name + "': branch graph is disconnected");
  }
}

GridCase parse_native_case(std::string_view text, std::vector<std::string>* warnings) {
  GridCase grid;
  bool have_header = false;
  std::vector<Branch> raw;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = split_tokens(line);
    if (tok.empty()) continue;

    auto need = [&](size_t count) {
      if (tok.size() < count) {
        throw ParseError(line_no, tok.back().column + static_cast<int>(tok.back().text.size()),
                         "expected " + std::to_string(count - 1) + " fields after '" +
                             std::string(tok[0].text) + "'");
      }
    };
    auto bus_field = [&](const Token& t) {
      auto v = to_long(t.text);
      if (!v) throw ParseError(line_no, t.column, "expected integer bus index");
      if (*v < 1 || *v > grid.n_bus) throw ParseError(line_no, t.column, "bus index out of range");
      return static_cast<int>(*v - 1);
    };
    auto real_field = [&](const Token& t) {
      auto v = to_double(t.text);
      if (!v) throw ParseError(line_no, t.column, "expected number");
      return *v;
    };

    const std::string_view keyword = tok[0].text;
    if (keyword == "grid") {
      if (have_header) throw ParseError(line_no, tok[0].column, "duplicate grid header");
      need(4);
      if (tok.size() > 4) throw ParseError(line_no, tok[4].column, "unexpected trailing field");
      grid.name = std::string(tok[1].text);
      auto n = to_long(tok[2].text);
      if (!n || *n < 1) throw ParseError(line_no, tok[2].column, "expected positive bus count");
      grid.n_bus = static_cast<int>(*n);
      grid.slack_bus = bus_field(tok[3]);
      grid.bus_ids.resize(grid.n_bus);
      std::iota(grid.bus_ids.begin(), grid.bus_ids.end(), 1L);
      have_header = true;
      continue;
    }
    if (!have_header) throw ParseError(line_no, tok[0].column, "expected 'grid' header first");
    if (keyword == "branch") {
      need(4);
      if (tok.size() > 5) throw ParseError(line_no, tok[5].column, "unexpected trailing field");
      Branch br;
      br.from = bus_field(tok[1]);
      br.to = bus_field(tok[2]);
      br.susceptance = real_field(tok[3]);
      if (tok.size() == 5) br.conductance = real_field(tok[4]);
      if (br.from == br.to) throw ParseError(line_no, tok[2].column, "branch endpoints coincide");
      if (!(br.susceptance > 0.0)) throw ParseError(line_no, tok[3].column, "non-positive susceptance");
      if (br.conductance < 0.0) throw ParseError(line_no, tok[4].column, "negative conductance");
      raw.push_back(br);
    } else if (keyword == "busid") {
      need(3);
      int bus = bus_field(tok[1]);
      auto id = to_long(tok[2].text);
      if (!id) throw ParseError(line_no, tok[2].column, "expected integer bus id");
      grid.bus_ids[bus] = *id;
    } else if (keyword == "secure") {
      // Protection-plan fragments may be appended to a case file.
      need(2);
      bus_field(tok[1]);
    } else {
      throw ParseError(line_no, tok[0].column, "unknown keyword '" + std::string(keyword) + "'");
    }
  }
  if (!have_header) throw ParseError(1, 1, "missing 'grid' header");
  grid.branches = merge_parallel(raw, grid.bus_ids, warnings);
  validate_case(grid);
  return grid;
}

namespace {

struct NumericBlock {
  std::vector<std::vector<double>> rows;
};

// Finds `mpc.<name> = [ ... ];` and parses its numeric rows.
std::optional<NumericBlock> find_block(std::string_view text, std::string_view name) {
  const std::string needle = "mpc." + std::string(name);
  size_t search = 0;
  while (true) {
    size_t at = text.find(needle, search);
    if (at == std::string_view::npos) return std::nullopt;
    search = at + needle.size();
    size_t k = search;
    while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
    if (k >= text.size() || text[k] != '=') continue;  // e.g. mpc.bus_name
    size_t open = text.find('[', k);
    if (open == std::string_view::npos) return std::nullopt;
    size_t close = text.find(']', open);
    if (close == std::string_view::npos) {
      throw ConfigError("matpower: unterminated block '" + std::string(name) + "'");
    }
    // Line number of the opening bracket, for error messages.
    int line_base = 1 + static_cast<int>(std::count(text.begin(), text.begin() + open, '\n'));
    std::string_view body = text.substr(open + 1, close - open - 1);
    NumericBlock block;
    std::vector<double> row;
    int line = line_base;
    size_t p = 0;
    while (p < body.size()) {
      size_t eol = body.find('\n', p);
      if (eol == std::string_view::npos) eol = body.size();
      std::string_view ln = body.substr(p, eol - p);
      p = eol + 1;
      if (auto pct = ln.find('%'); pct != std::string_view::npos) ln = ln.substr(0, pct);
      // `;` terminates a row; commas separate fields like whitespace.
      size_t q = 0;
      while (q <= ln.size()) {
        size_t semi = ln.find(';', q);
        std::string_view seg = ln.substr(q, semi == std::string_view::npos ? ln.size() - q : semi - q);
        std::string cleaned(seg);
        std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
        for (const Token& t : split_tokens(cleaned)) {
          auto v = to_double(t.text);
          if (!v) {
            throw ParseError(line, t.column + static_cast<int>(q),
                             "non-numeric entry '" + std::string(t.text) + "' in block '" +
                                 std::string(name) + "'");
          }
          row.push_back(*v);
        }
        if (semi == std::string_view::npos) break;
        if (!row.empty()) block.rows.push_back(std::move(row));
        row.clear();
        q = semi + 1;
      }
      // A newline also ends a row in MATLAB matrix literals.
      if (!row.empty()) block.rows.push_back(std::move(row));
      row.clear();
      ++line;
    }
    return block;
  }
}

}  // namespace

GridCase parse_matpower_case(std::string_view text, std::vector<std::string>* warnings) {
  auto bus = find_block(text, "bus");
  if (!bus) throw ConfigError("matpower: missing block 'bus'");
  auto branch = find_block(text, "branch");
  if (!branch) throw ConfigError("matpower: missing block 'branch'");

  GridCase grid;
  // The function name is the conventional case name.
  if (auto f = text.find("function"); f != std::string_view::npos) {
    size_t eq = text.find('=', f);
    size_t eol = text.find('\n', f);
    if (eq != std::string_view::npos && eq < eol) {
      auto toks = split_tokens(text.substr(eq + 1, eol - eq - 1));
      if (!toks.empty()) grid.name = std::string(toks[0].text);
    }
  }
  if (grid.name.empty()) grid.name = "matpower";

  std::map<long, int> index_of;
  std::optional<int> slack;
  for (const auto& row : bus->rows) {
    if (row.size() < 2) throw ConfigError("matpower: bus row needs at least 2 columns");
    long id = std::lround(row[0]);
    if (index_of.count(id)) throw ConfigError("matpower: duplicate bus id " + std::to_string(id));
    int idx = static_cast<int>(grid.bus_ids.size());
    index_of.emplace(id, idx);
    grid.bus_ids.push_back(id);
    if (std::lround(row[1]) == 3 && !slack) slack = idx;
  }
  if (!slack) throw ConfigError("matpower: no slack bus found (bus type 3)");
  grid.n_bus = static_cast<int>(grid.bus_ids.size());
  grid.slack_bus = *slack;

  std::vector<Branch> raw;
  for (const auto& row : branch->rows) {
    if (row.size() < 4) throw ConfigError("matpower: branch row needs at least 4 columns");
    if (row.size() >= 11 && row[10] == 0.0) continue;
    long f = std::lround(row[0]), t = std::lround(row[1]);
    auto fi = index_of.find(f), ti = index_of.find(t);
    if (fi == index_of.end() || ti == index_of.end()) {
      throw ConfigError("matpower: branch " + std::to_string(f) + "-" + std::to_string(t) +
                        " references an unknown bus");
    }
    const double r = row[2], x = row[3];
    if (x == 0.0) {
      throw ConfigError("matpower: zero reactance on branch " + std::to_string(f) + "-" +
                        std::to_string(t));
    }
    Branch br;
    br.from = fi->second;
    br.to = ti->second;
    br.susceptance = 1.0 / x;
    br.conductance = r / (r * r + x * x);
    raw.push_back(br);
  }
  grid.branches = merge_parallel(raw, grid.bus_ids, warnings);
  validate_case(grid);
  return grid;
}

std::string serialize_native_case(const GridCase& grid) {
  std::ostringstream os;
  os << "grid " << grid.name << ' ' << grid.n_bus << ' ' << grid.slack_bus + 1 << '\n';
  for (int b = 0; b < grid.n_bus; ++b) {
    if (grid.bus_ids[b] != b + 1) os << "busid " << b + 1 << ' ' << grid.bus_ids[b] << '\n';
  }
  for (const Branch& br : grid.branches) {
    os << "branch " << br.from + 1 << ' ' << br.to + 1 << ' ' << format_double(br.susceptance);
    if (br.conductance != 0.0) os << ' ' << format_double(br.conductance);
    os << '\n';
  }
  return os.str();
}

std::vector<int> parse_secure_fragment(std::string_view text) {
  std::vector<int> buses;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = split_tokens(line);
    if (tok.empty() || tok[0].text != "secure") continue;
    if (tok.size() != 2) throw ParseError(line_no, tok[0].column, "expected 'secure <bus>'");
    auto v = to_long(tok[1].text);
    if (!v || *v < 1) throw ParseError(line_no, tok[1].column, "expected positive bus index");
    buses.push_back(static_cast<int>(*v - 1));
  }
  return buses;
}

std::string serialize_secure_fragment(const std::vector<int>& buses) {
  std::string out;
  for (int b : buses) out += "secure " + std::to_string(b + 1) + "\n";
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path resolve_case_path(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(name_or_path)) return name_or_path;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("GRIDSHIELD_CASE_DIR"); env && *env) dirs.emplace_back(env);
  dirs.emplace_back(GRIDSHIELD_DEFAULT_CASE_DIR);
  for (const auto& dir : dirs) {
    for (const char* ext : {"", ".grid", ".m"}) {
      fs::path candidate = dir / (name_or_path + ext);
      if (fs::is_regular_file(candidate)) return candidate;
    }
  }
  throw IoError("case '" + name_or_path + "' not found");
}

GridCase load_case(const std::string& name_or_path, std::vector<std::string>* warnings) {
  auto path = resolve_case_path(name_or_path);
  std::string text = read_text_file(path);
  if (path.extension() == ".m") return parse_matpower_case(text, warnings);
  return parse_native_case(text, warnings);
}

}  // namespace gridshield
