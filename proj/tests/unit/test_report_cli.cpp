#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridshield/case_io.hpp"
#include "gridshield/error.hpp"
#include "gridshield/report.hpp"

using namespace gridshield;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gridshield_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GRIDSHIELD_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("flat config parsing") {
  const auto c = parse_flat_config("# run\ntau = 0.4\n\n k=3  # sparse\ncase = ieee57");
  CHECK(c.size() == 3);
  CHECK(c.at("tau") == "0.4");
  CHECK(c.at("k") == "3");
  CHECK(c.at("case") == "ieee57");
  CHECK(parse_flat_config(serialize_flat_config(c)) == c);
  CHECK(config_comment({{"a", "1"}, {"b", "x"}}) == "# a=1 b=x\n");
  try {
    parse_flat_config("tau = 1\nnonsense\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("atomic writes and manifests") {
  const fs::path dir = scratch("report");
  write_file_atomic(dir / "sub" / "x.txt", "hello");
  CHECK(slurp(dir / "sub" / "x.txt") == "hello");
  CHECK_FALSE(fs::exists(dir / "sub" / "x.txt.tmp"));
  CHECK(sha256_file(dir / "sub" / "x.txt") == sha256_hex("hello"));

  RunManifest m;
  m.command = "roc";
  m.config = {{"tau", "0.2"}};
  m.inputs = {{"cfg", "00"}};
  m.seed = "1";
  m.outputs = {"stats.csv"};
  const auto j = nlohmann::json::parse(manifest_json(m));
  for (const char* key : {"command", "config", "inputs", "tool_version", "seed", "outputs", "wall_clock_seconds"}) {
    CHECK(j.contains(key));
  }
  const RunManifest back = parse_manifest_json(manifest_json(m));
  CHECK(back.command == "roc");
  CHECK(back.config == m.config);
  CHECK_THROWS_AS(parse_manifest_json("{}"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("CLI exit codes") {
  const fs::path dir = scratch("exit");
  const std::string out = " --out-dir " + dir.string();
  CHECK(run_cli("roc --case grid6 --trials 0" + out) == 2);
  CHECK(run_cli("roc --case no_such_case --trials 10" + out) == 5);
  CHECK(run_cli("attack --case path3 --k 2 --tau 1 --secure 1,2,3 --attack gfdi" + out) == 3);
  CHECK(run_cli("bogus") == 2);
  std::ofstream(dir / "bad.cfg") << "tau = 0.2\nunknown_key = 1\n";
  CHECK(run_cli("roc --config " + (dir / "bad.cfg").string() + out) == 2);
  fs::remove_all(dir);
}

TEST_CASE("CLI outputs carry the config and re-run byte for byte from the manifest") {
  const fs::path dir = scratch("rerun");
  const std::string args = "roc --case grid6 --k 2 --tau 0.3 --trials 40 --calibration-trials 200 --detector gtv "
                           "--attack gfdi,rand --out-dir " + dir.string();
  REQUIRE(run_cli(args) == 0);
  const std::string stats = slurp(dir / "stats.csv");
  const std::string roc = slurp(dir / "roc.csv");
  CHECK(stats.rfind("# ", 0) == 0);
  CHECK(stats.find("tau=0.3") != std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(dir / "roc_manifest.json"));
  CHECK(manifest["command"] == "roc");
  CHECK(manifest["config"]["trials"] == "40");

  fs::copy_file(dir / "roc_manifest.json", dir / "saved.json");
  fs::remove(dir / "stats.csv");
  fs::remove(dir / "roc.csv");
  REQUIRE(run_cli("roc --config " + (dir / "saved.json").string()) == 0);
  CHECK(slurp(dir / "stats.csv") == stats);
  CHECK(slurp(dir / "roc.csv") == roc);
  const auto again = nlohmann::json::parse(slurp(dir / "roc_manifest.json"));
  CHECK(again["inputs"].contains((dir / "saved.json").string()));
  fs::remove_all(dir);
}

TEST_CASE("CLI attack and spectrum dumps") {
  const fs::path dir = scratch("dumps");
  REQUIRE(run_cli("attack --case path3 --k 2 --tau 1 --attack gfdi --out-dir " + dir.string()) == 0);
  const auto meta = nlohmann::json::parse(slurp(dir / "attack_gfdi_meta.json"));
  CHECK(meta["tv"].get<double>() >= 0.5 - 1e-9);
  CHECK(fs::exists(dir / "attack_gfdi_state.csv"));
  REQUIRE(run_cli("spectrum --case grid6 --k 2 --tau 0.3 --attack gfdi --out-dir " + dir.string()) == 0);
  const std::string spec = slurp(dir / "spectrum.csv");
  CHECK(spec.find("index,lambda\n1,") != std::string::npos);
  fs::remove_all(dir);
}
