#include <doctest.h>

#include <string>

#include "gridshield/case_io.hpp"
#include "gridshield/error.hpp"
#include "gridshield/grid_model.hpp"
#include "support.hpp"

using namespace gridshield;

namespace {

const char* kPath3 = R"(# three buses in a line
grid path3 3 1
branch 1 2 1
branch 2 3 1
)";

const char* kTwoBusMatpower = R"(function mpc = two
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.06	0.94;
	2	1	0	0	0	0	1	1	0	135	1	1.06	0.94;
];
mpc.gen = [
	1	0	0	10	-10	1	100	1	10	0;
];
mpc.branch = [
	1	2	0.01	0.5	0	0	0	0	0	0	1	-360	360;
];
)";

}  // namespace

TEST_CASE("native parser reads the 3-bus path") {
  const GridCase g = parse_native_case(kPath3);
  CHECK(g.n_bus == 3);
  CHECK(g.branches.size() == 2);
  CHECK(g.slack_bus == 0);
  CHECK(g.name == "path3");
  CHECK(g.branches[0].susceptance == 1.0);
}

TEST_CASE("native parser rejects a branch to a missing bus") {
  const std::string text = "grid bad 3 1\nbranch 1 2 1\nbranch 1 4 1\n";
  try {
    parse_native_case(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bus index out of range") != std::string::npos);
    CHECK(e.line == 3);
    CHECK(e.category() == ErrorCategory::config);
  }
}

TEST_CASE("native parser validation errors") {
  CHECK_THROWS_AS(parse_native_case("grid g 3 1\nbranch 1 2 1\n"), ConfigError);  // disconnected
  CHECK_THROWS_AS(parse_native_case("grid g 2 1\nbranch 1 2 -1\n"), ParseError);
  CHECK_THROWS_AS(parse_native_case("grid g 2 1\nbranch 1 2 0\n"), ParseError);
  CHECK_THROWS_AS(parse_native_case("branch 1 2 1\n"), ParseError);
  CHECK_THROWS_AS(parse_native_case("grid g 2 1\nbranch 1 2 x\n"), ParseError);
  CHECK_THROWS_AS(parse_native_case("grid g 2 3\nbranch 1 2 1\n"), ConfigError);
}

TEST_CASE("duplicate branches merge with a warning") {
  std::vector<std::string> warnings;
  const GridCase g = parse_native_case("grid g 2 1\nbranch 1 2 1.5\nbranch 2 1 2.5\n", &warnings);
  REQUIRE(g.branches.size() == 1);
  CHECK(g.branches[0].susceptance == doctest::Approx(4.0));
  CHECK(warnings.size() == 1);
}

TEST_CASE("matpower importer: b = 1/x on a 2-bus block") {
  const GridCase g = parse_matpower_case(kTwoBusMatpower);
  CHECK(g.n_bus == 2);
  REQUIRE(g.branches.size() == 1);
  CHECK(g.branches[0].susceptance == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(g.slack_bus == 0);
}

TEST_CASE("matpower importer skips out-of-service branches") {
  std::string text = kTwoBusMatpower;
  // A third bus joined by two lines, one of them switched off.
  text.replace(text.find("];\nmpc.gen"), 3,
               "\t3\t1\t0\t0\t0\t0\t1\t1\t0\t135\t1\t1.06\t0.94;\n];");
  text.replace(text.find("360;\n];"), 7,
               "360;\n\t2\t3\t0\t0.25\t0\t0\t0\t0\t0\t0\t1\t-360\t360;\n"
               "\t1\t3\t0\t0.1\t0\t0\t0\t0\t0\t0\t0\t-360\t360;\n];");
  const GridCase g = parse_matpower_case(text);
  CHECK(g.n_bus == 3);
  REQUIRE(g.branches.size() == 2);
  CHECK(g.branches[1].susceptance == doctest::Approx(4.0));
}

TEST_CASE("matpower importer errors") {
  CHECK_THROWS_AS(parse_matpower_case("mpc.baseMVA = 100;\n"), ConfigError);
  std::string no_slack = kTwoBusMatpower;
  no_slack.replace(no_slack.find("\t1\t3\t"), 5, "\t1\t2\t");
  CHECK_THROWS_AS(parse_matpower_case(no_slack), ConfigError);
  std::string zero_x = kTwoBusMatpower;
  zero_x.replace(zero_x.find("0.5"), 3, "0.0");
  CHECK_THROWS_AS(parse_matpower_case(zero_x), ConfigError);
}

TEST_CASE("bundled IEEE-57 case") {
  const GridCase native = load_case("ieee57");
  CHECK(native.n_bus == 57);
  CHECK(native.branches.size() == 78);
  const GridCase m = load_case("case57");
  CHECK(m.n_bus == 57);
  CHECK(m.slack_bus == 0);
}

TEST_CASE("bundled cases load") {
  CHECK(load_case("path3").n_bus == 3);
  CHECK(load_case("grid6").n_bus == 6);
  CHECK(load_case("ieee30").n_bus == 30);
  CHECK(load_case("ieee118").n_bus == 118);
  CHECK_THROWS_AS(load_case("no_such_case"), IoError);
}

TEST_CASE("native serialization round-trips") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const GridCase g = testing::random_connected(rng, 3 + t % 6);
    CHECK(parse_native_case(serialize_native_case(g)) == g);
  }
  const GridCase ieee = load_case("case118");
  CHECK(parse_native_case(serialize_native_case(ieee)) == ieee);
}

TEST_CASE("native and matpower files give identical Laplacians") {
  for (const auto& [native, matpower] :
       {std::pair{"ieee30", "case30"}, std::pair{"ieee57", "case57"}, std::pair{"ieee118", "case118"}}) {
    const Matrix a = build_laplacian(load_case(native));
    const Matrix b = build_laplacian(load_case(matpower));
    REQUIRE(a.rows() == b.rows());
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("secure fragments") {
  const auto buses = parse_secure_fragment("# plan\nsecure 3\nsecure 1\n");
  CHECK(buses == std::vector<int>{2, 0});
  CHECK(parse_secure_fragment(serialize_secure_fragment(buses)) == buses);
  CHECK_THROWS_AS(parse_secure_fragment("secure 0\n"), ParseError);
}
