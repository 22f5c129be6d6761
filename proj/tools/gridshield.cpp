// gridshield command-line front end.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridshield/attacks.hpp"
#include "gridshield/case_io.hpp"
#include "gridshield/detection.hpp"
#include "gridshield/error.hpp"
#include "gridshield/grid_model.hpp"
#include "gridshield/gsp.hpp"
#include "gridshield/protection.hpp"
#include "gridshield/random.hpp"
#include "gridshield/report.hpp"
#include "gridshield/simulation.hpp"

namespace fs = std::filesystem;
using namespace gridshield;

namespace {

using ConfigMap = std::map<std::string, std::string>;

// Key, default, help. Flags are the keys with '_' written as '-'.
struct KeySpec {
  const char* key;
  const char* fallback;
  const char* help;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"case", "ieee57", "case name or path (.grid or MATPOWER .m)"},
      {"model", "dc", "measurement model: dc or ac"},
      {"tau", "0.2", "attack impact tau"},
      {"k", "5", "attack sparsity k"},
      {"beta", "0.05", "state smoothness beta"},
      {"noise_var", "0.001", "measurement noise variance"},
      {"magnitude_std", "0.01", "AC voltage magnitude standard deviation"},
      {"pfa", "0.05", "target false-alarm probability"},
      {"trials", "1000", "Monte-Carlo trials"},
      {"calibration_trials", "10000", "null trials for threshold calibration"},
      {"seed", "1", "base random seed"},
      {"delta", "inf", "protection target TV"},
      {"secure", "", "secured buses, comma separated, 1-based"},
      {"detector", "", "detectors, comma separated (default: all of the model)"},
      {"attack", "gfdi,rand,rand_gfdi,sparse_low,sparse_avg", "attack kinds, comma separated"},
      {"lambda_cut", "", "ideal high-pass cutoff (default lambda_ceil(N/2))"},
      {"l1_budget", "", "l1 budget of the GFDI relaxation (default k)"},
      {"policy", "greedy", "protection policy: greedy, random, sparsest, exhaustive"},
      {"policy_seed", "0", "seed of the random protection policy"},
      {"max_secured", "", "cap on |D| for protection"},
      {"axis", "tau", "sweep axis: tau, pfa, protection_ratio"},
      {"grid", "", "sweep or ROC grid, comma separated"},
      {"signal", "gfdi", "spectrum signal: an attack kind"},
      {"out_dir", "out", "output directory"},
      {"workers", "1", "worker threads"},
  };
  return specs;
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (char& c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  if (v == "inf") return std::numeric_limits<double>::infinity();
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

long long to_integer(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  try {
    size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

std::optional<double> optional_double(const ConfigMap& c, const std::string& key) {
  if (c.at(key).empty()) return std::nullopt;
  return to_double(c, key);
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    ConfigMap tmp{{key, item}};
    out.push_back(to_double(tmp, key));
  }
  return out;
}

struct Run {
  std::string command;
  ConfigMap config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  fs::path out_dir;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  // Writes one output file; CSV files get the config header comment.
  void write(const std::string& name, const std::string& content) {
    const fs::path path = out_dir / name;
    std::string body = content;
    if (path.extension() == ".csv") body = config_comment(config) + content;
    write_file_atomic(path, body);
    outputs.push_back(name);
  }

  void finish() {
    RunManifest m;
    m.command = command;
    m.config = config;
    for (const auto& in : inputs) m.inputs[in] = sha256_file(in);
    m.version = GRIDSHIELD_VERSION;
    m.seed = config.at("seed");
    m.outputs = outputs;
    m.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file_atomic(out_dir / (command + "_manifest.json"), manifest_json(m));
  }
};

ExperimentConfig experiment_config(const ConfigMap& c, const GridCase& grid) {
  ExperimentConfig e;
  e.case_name = c.at("case");
  e.model = parse_power_model(c.at("model"));
  e.tau = to_double(c, "tau");
  e.k = static_cast<int>(to_integer(c, "k"));
  e.beta = to_double(c, "beta");
  e.noise_var = to_double(c, "noise_var");
  e.magnitude_std = to_double(c, "magnitude_std");
  e.target_pfa = to_double(c, "pfa");
  e.trials = static_cast<int>(to_integer(c, "trials"));
  e.calibration_trials = static_cast<int>(to_integer(c, "calibration_trials"));
  e.seed = static_cast<std::uint64_t>(to_integer(c, "seed"));
  e.attacks.clear();
  for (const auto& a : split_list(c.at("attack"))) e.attacks.push_back(parse_attack_kind(a));
  e.detectors = split_list(c.at("detector"));
  for (const auto& s : split_list(c.at("secure"))) {
    ConfigMap tmp{{"secure", s}};
    const long long bus = to_integer(tmp, "secure");
    if (bus < 1 || bus > grid.n_bus) throw ConfigError("secure: bus " + s + " out of range");
    e.secured.push_back(static_cast<int>(bus - 1));
  }
  e.lambda_cut = optional_double(c, "lambda_cut");
  e.l1_budget = optional_double(c, "l1_budget");
  e.workers = static_cast<int>(to_integer(c, "workers"));
  e.validate();
  return e;
}

std::string bus_list(const std::vector<int>& buses) {
  std::string out;
  for (size_t i = 0; i < buses.size(); ++i) out += (i ? "," : "") + std::to_string(buses[i] + 1);
  return out;
}

// Builds one attack of the given kind; random kinds use the attack stream of
// the Monte-Carlo code at index 0.
AttackVector build_attack(AttackKind kind, const AttackSetting& setting, const ExperimentConfig& e) {
  GfdiOptions g;
  g.l1_budget = e.l1_budget;
  g.workers = e.workers;
  const auto kind_index = static_cast<std::uint64_t>(kind);
  const std::uint64_t seed = derive_seed(e.seed, 0x30 + kind_index, 0);
  switch (kind) {
    case AttackKind::gfdi: {
      auto r = gfdi_attack(setting, e.k, e.tau, g);
      if (!r.attack) throw InfeasibleError("gfdi: no feasible attack under the secured set");
      return *r.attack;
    }
    case AttackKind::rand: return attack_rand(setting, e.k, e.tau, seed);
    case AttackKind::rand_gfdi: return attack_rand_gfdi(setting, e.k, e.tau, seed, g);
    case AttackKind::sparse_low: return attack_sparsest(setting, e.tau, SparseVariant::low);
    case AttackKind::sparse_avg: return attack_sparsest(setting, e.tau, SparseVariant::avg);
  }
  throw ConfigError("unknown attack kind");
}

struct Loaded {
  GridCase grid;
  std::string path;
};

Loaded load(const ConfigMap& c) {
  Loaded l;
  l.path = resolve_case_path(c.at("case")).string();
  std::vector<std::string> warnings;
  l.grid = load_case(l.path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return l;
}

void cmd_spectrum(Run& run) {
  const Loaded l = load(run.config);
  run.inputs.push_back(l.path);
  const ExperimentConfig e = experiment_config(run.config, l.grid);
  const Scenario sc(l.grid, e.noise_var, e.lambda_cut);
  const auto rows = derive_secured_rows(e.secured, sc.model(), l.grid);
  const AttackSetting setting{sc.laplacian(), sc.model().H, rows.rows};
  const AttackKind kind = parse_attack_kind(run.config.at("signal"));
  const AttackVector attack = build_attack(kind, setting, e);
  const Vector state = gen_smooth_state(sc.basis(), e.beta, derive_seed(e.seed, 0x20, 0));
  const Vector contaminated = state + attack.c;

  run.write("spectrum.csv", spectrum_csv(sc.basis()));
  run.write("state.csv", signal_csv(sc.basis(), state));
  run.write("attack_" + to_string(kind) + ".csv", signal_csv(sc.basis(), attack.c));
  run.write("contaminated.csv", signal_csv(sc.basis(), contaminated));
  std::cout << "attack " << to_string(kind) << " tv=" << attack.tv
            << " low_quartile_energy=" << low_frequency_energy(sc.basis(), attack.c) << "\n";
  std::cout << "state tv=" << graph_tv(sc.basis(), state)
            << " low_quartile_energy=" << low_frequency_energy(sc.basis(), state) << "\n";
}

void cmd_attack(Run& run) {
  const Loaded l = load(run.config);
  run.inputs.push_back(l.path);
  const ExperimentConfig e = experiment_config(run.config, l.grid);
  const Matrix L = build_laplacian(l.grid);
  const MeasurementModel model = build_measurement_model(l.grid, MeterConfig::full(l.grid), e.noise_var);
  const auto rows = derive_secured_rows(e.secured, model, l.grid);
  const AttackSetting setting{L, model.H, rows.rows};
  for (AttackKind kind : e.attacks) {
    const AttackVector a = build_attack(kind, setting, e);
    const std::string name = "attack_" + to_string(kind);
    run.write(name + "_state.csv", attack_state_csv(a));
    run.write(name + "_meas.csv", attack_measurement_csv(a));
    run.write(name + "_meta.json", attack_metadata(a));
    std::cout << to_string(kind) << " tv=" << a.tv << " support=" << bus_list(a.support);
    if (a.target) std::cout << " target=" << *a.target + 1;
    std::cout << "\n";
  }
}

void cmd_protect(Run& run) {
  const Loaded l = load(run.config);
  run.inputs.push_back(l.path);
  const ExperimentConfig e = experiment_config(run.config, l.grid);
  const Matrix L = build_laplacian(l.grid);
  const MeasurementModel model = build_measurement_model(l.grid, MeterConfig::full(l.grid), e.noise_var);
  const ProtectionProblem problem{l.grid, model, L, e.k, e.tau};
  const double delta = to_double(run.config, "delta");
  std::optional<int> max_secured;
  if (!run.config.at("max_secured").empty()) max_secured = static_cast<int>(to_integer(run.config, "max_secured"));
  const std::string policy = run.config.at("policy");

  ProtectionPlan plan;
  if (policy == "exhaustive") {
    plan = protect_exhaustive(problem, delta);
  } else {
    const int size = max_secured.value_or(l.grid.n_bus);
    switch (parse_protection_policy(policy)) {
      case ProtectionPolicy::greedy: {
        GfdiOptions g;
        g.l1_budget = e.l1_budget;
        g.workers = e.workers;
        plan = protect_greedy(problem, delta, max_secured, g);
        break;
      }
      case ProtectionPolicy::random:
        plan = protect_random(problem, size,
                              static_cast<std::uint64_t>(to_integer(run.config, "policy_seed")));
        break;
      case ProtectionPolicy::sparsest: plan = protect_sparsest_baseline(problem, size); break;
    }
  }
  run.write("plan.csv", plan_csv(plan));
  run.write("plan.grid", serialize_secure_fragment(plan.D));
  std::cout << "policy=" << plan.policy << " secured=" << plan.D.size() << " buses=" << bus_list(plan.D)
            << " final_tv=" << plan.final_tv << " converged=" << (plan.converged ? "yes" : "no") << "\n";
}

std::vector<double> roc_grid(const ConfigMap& c) {
  if (!c.at("grid").empty()) return to_doubles("grid", c.at("grid"));
  std::vector<double> g;
  for (int i = 1; i <= 99; ++i) g.push_back(i / 100.0);
  return g;
}

void cmd_roc(Run& run) {
  const Loaded l = load(run.config);
  run.inputs.push_back(l.path);
  const ExperimentConfig e = experiment_config(run.config, l.grid);
  const Scenario sc(l.grid, e.noise_var, e.lambda_cut);
  const Calibration cal = calibrate(sc, e);
  const DetectionStats stats = run_monte_carlo(sc, e, &cal);
  run.write("stats.csv", stats_csv(stats));
  run.write("thresholds.csv", thresholds_csv(stats.thresholds));

  std::ostringstream roc;
  roc.precision(17);
  roc << "attack,detector,pfa,pd\n";
  const auto grid = roc_grid(run.config);
  for (const auto& o : stats.outcomes) {
    for (const auto& p : roc_curve(cal, o, grid)) roc << o.attack << ',' << o.detector << ',' << p.pfa << ',' << p.pd << '\n';
  }
  run.write("roc.csv", roc.str());
  for (const auto& o : stats.outcomes) {
    std::cout << o.attack << ' ' << o.detector << " pd=" << o.pd << " [" << o.ci_lo << ", " << o.ci_hi << "]"
              << (o.infeasible ? " infeasible" : "") << "\n";
  }
}

void cmd_sweep(Run& run) {
  const Loaded l = load(run.config);
  run.inputs.push_back(l.path);
  const ExperimentConfig e = experiment_config(run.config, l.grid);
  const Scenario sc(l.grid, e.noise_var, e.lambda_cut);
  const SweepAxis axis = parse_sweep_axis(run.config.at("axis"));
  const std::vector<double> grid = to_doubles("grid", run.config.at("grid"));
  SweepOptions opt;
  opt.policy = parse_protection_policy(run.config.at("policy"));
  opt.policy_seed = static_cast<std::uint64_t>(to_integer(run.config, "policy_seed"));
  const auto rows = sweep(sc, e, axis, grid, opt);
  run.write("sweep.csv", sweep_csv(rows, axis, e));
  for (const auto& r : rows) {
    std::cout << to_string(axis) << '=' << r.value << " secured=" << r.secured << ' ' << r.outcome.attack << ' '
              << r.outcome.detector << " pd=" << r.outcome.pd << "\n";
  }
}

void cmd_calibrate(Run& run) {
  const Loaded l = load(run.config);
  run.inputs.push_back(l.path);
  const ExperimentConfig e = experiment_config(run.config, l.grid);
  const Scenario sc(l.grid, e.noise_var, e.lambda_cut);
  const Calibration cal = calibrate(sc, e);
  std::vector<DetectorThreshold> all;
  for (const auto& [det, ths] : cal.thresholds) {
    all.insert(all.end(), ths.begin(), ths.end());
    const auto& samples = cal.null_statistics.at(det);
    for (size_t b = 0; b < samples.size(); ++b) {
      std::ostringstream trace;
      trace.precision(17);
      trace << "trial,statistic,alarm\n";
      for (size_t t = 0; t < samples[b].size(); ++t) {
        trace << t + 1 << ',' << samples[b][t] << ',' << (samples[b][t] > ths[b].gamma ? 1 : 0) << '\n';
      }
      const std::string suffix = samples.size() > 1 ? "_" + std::to_string(b + 1) : "";
      run.write("null_" + det + suffix + ".csv", trace.str());
    }
  }
  run.write("thresholds.csv", thresholds_csv(all));
  for (const auto& t : all) std::cout << t.detector_id << " gamma=" << t.gamma << " pfa=" << t.target_pfa << "\n";
}

void cmd_convert(const std::string& input, const std::string& output, const std::string& name) {
  std::vector<std::string> warnings;
  GridCase grid = load_case(input, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (!name.empty()) grid.name = name;
  write_file_atomic(output, serialize_native_case(grid));
  std::cout << grid.name << ": " << grid.n_bus << " buses, " << grid.branches.size() << " branches\n";
}

ConfigMap read_config_file(const std::string& path, const std::string& command) {
  const std::string text = read_text_file(path);
  if (fs::path(path).extension() == ".json") {
    const RunManifest m = parse_manifest_json(text);
    if (m.command != command) {
      throw ConfigError("manifest was written by '" + m.command + "', not '" + command + "'");
    }
    return m.config;
  }
  return parse_flat_config(text);
}

int run_command(const std::string& command, const ConfigMap& flags, const std::string& config_path) {
  ConfigMap resolved;
  for (const auto& s : key_specs()) resolved[s.key] = s.fallback;
  if (!config_path.empty()) {
    for (const auto& [k, v] : read_config_file(config_path, command)) {
      if (!resolved.count(k)) throw ConfigError("unknown config key '" + k + "'");
      resolved[k] = v;
    }
  }
  for (const auto& [k, v] : flags) resolved[k] = v;

  Run run;
  run.command = command;
  run.config = resolved;
  run.out_dir = resolved.at("out_dir");
  if (!config_path.empty()) run.inputs.push_back(config_path);

  if (command == "spectrum") cmd_spectrum(run);
  else if (command == "attack") cmd_attack(run);
  else if (command == "protect") cmd_protect(run);
  else if (command == "roc") cmd_roc(run);
  else if (command == "sweep") cmd_sweep(run);
  else if (command == "calibrate") cmd_calibrate(run);
  run.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-signal-processing tools for false data injection attacks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(GRIDSHIELD_VERSION));

  ConfigMap flags;
  std::string config_path;
  std::map<std::string, std::string> raw;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"spectrum", "dump the spectrum and vertex/GFT signals"},
      {"attack", "construct attacks and dump them"},
      {"protect", "compute a protection plan"},
      {"roc", "Monte-Carlo detection probabilities and ROC"},
      {"sweep", "detection along a tau, pfa or protection-ratio axis"},
      {"calibrate", "calibrate detector thresholds on null data"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key = value file, or a manifest to re-run");
    for (const auto& s : key_specs()) {
      std::string key = s.key;
      sub->add_option_function<std::string>(
          flag_name(key), [&flags, key](const std::string& v) { flags[key] = v; }, s.help);
    }
    subs.push_back(sub);
  }

  std::string conv_in, conv_out, conv_name;
  CLI::App* convert = app.add_subcommand("convert", "convert a case file to the native format");
  convert->add_option("--case", conv_in, "input case")->required();
  convert->add_option("--out", conv_out, "output .grid path")->required();
  convert->add_option("--name", conv_name, "case name to store");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorCategory::config);
  }

  try {
    if (convert->parsed()) {
      cmd_convert(conv_in, conv_out, conv_name);
      return 0;
    }
    for (CLI::App* sub : subs) {
      if (sub->parsed()) return run_command(sub->get_name(), flags, config_path);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorCategory::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorCategory::numeric);
  }
  return 0;
}
