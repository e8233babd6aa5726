#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include "qlocp/config.hpp"
#include "qlocp/harness.hpp"

using namespace qlocp;

TEST_CASE("closed-form benchmark fields take their textbook values") {
  CHECK(exact_example("y", 0.5, 0.5) == Catch::Approx(1.0).margin(1e-15));
  CHECK(exact_example("u", 0.5, 0.5) == Catch::Approx(2.0 * kPi * kPi).margin(1e-12));
  CHECK(exact_example("phi", 0.5, 0.5) ==
        Catch::Approx(-kExampleNu * 2.0 * kPi * kPi).margin(1e-15));
  CHECK(exact_example("y_d", 0.5, 0.5) ==
        Catch::Approx(1.0 + 4.0 * kExampleNu * std::pow(kPi, 4)).margin(1e-12));
  // Boundary values vanish for every field.
  for (const char* f : {"y", "u", "phi", "y_d"}) {
    CHECK(exact_example(f, 0.0, 0.3) == Catch::Approx(0.0).margin(1e-12));
    CHECK(exact_example(f, 0.7, 1.0) == Catch::Approx(0.0).margin(1e-12));
  }
  CHECK_THROWS_AS(exact_example("bogus", 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("field error norms vanish on exact data and see constant offsets") {
  const TriMesh mesh = uniform_unit_square(6);
  const ScalarField f = [](double a, double b) { return a + 2.0 * b; };
  const FeFunction fh = interpolate(mesh, f);
  auto [l2, linf] = field_error_norms(fh, f);
  CHECK(l2 == Catch::Approx(0.0).margin(1e-14));
  CHECK(linf == Catch::Approx(0.0).margin(1e-14));
  auto [l2c, linfc] =
      field_error_norms(fh, [&](double a, double b) { return f(a, b) + 0.25; });
  CHECK(l2c == Catch::Approx(0.25).epsilon(1e-12));
  CHECK(linfc == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("EOC is exact on power laws and rejects bad input") {
  const std::vector<double> hs{0.1, 0.05, 0.025};
  std::vector<double> e2, e3;
  for (double h : hs) {
    e2.push_back(7.0 * h * h);
    e3.push_back(0.3 * h * h * h);
  }
  for (double v : eoc(e2, hs)) CHECK(v == Catch::Approx(2.0).epsilon(1e-12));
  for (double v : eoc(e3, hs)) CHECK(v == Catch::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(eoc({1.0}, {0.1}), std::invalid_argument);
  CHECK_THROWS_AS(eoc({1.0, 0.5}, {0.1}), std::invalid_argument);
  CHECK_THROWS_AS(eoc({1.0, 0.0}, {0.1, 0.05}), std::invalid_argument);
  CHECK_THROWS_AS(eoc({1.0, -0.5}, {0.1, 0.05}), std::invalid_argument);
}

TEST_CASE("study CSV writing and parsing round-trip, including blank EOC cells") {
  std::vector<StudyRow> rows(2);
  rows[0] = {0.1, 1e-3, 2e-3, 2.01, 1.99, 5, 0.7};
  rows[1] = {0.05, 2.5e-4, 5e-4, std::nan(""), std::nan(""), 6, 2.9};
  const std::string path = "harness_roundtrip.csv";
  write_study_csv(rows, path);
  const auto back = parse_study_csv(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == 2);
  CHECK(back[0].h == rows[0].h);
  CHECK(back[0].l2_error == rows[0].l2_error);
  CHECK(back[0].linf_error == rows[0].linf_error);
  CHECK(back[0].eoc_l2 == rows[0].eoc_l2);
  CHECK(back[0].eoc_linf == rows[0].eoc_linf);
  CHECK(back[0].ssn_iterations == 5);
  CHECK(back[0].seconds == rows[0].seconds);
  CHECK(back[1].h == rows[1].h);
  CHECK(std::isnan(back[1].eoc_l2));
  CHECK(std::isnan(back[1].eoc_linf));
  CHECK(back[1].ssn_iterations == 6);
}

TEST_CASE("study configuration validation catches malformed mesh lists") {
  StudyConfig sc;
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);  // empty
  sc.ms = {16, 16};
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);  // not increasing
  sc.ms = {32, 16};
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
  sc.ms = {0, 16};
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
  sc.ms = {16, 32};
  CHECK_NOTHROW(sc.validate());
  sc.problem = "bogus";
  CHECK_THROWS_AS(run_study(sc), StudyError);
}

TEST_CASE("a small study run produces sane rows with blank trailing EOC") {
  StudyConfig sc;
  sc.ms = {8, 16};
  const auto rows = run_study(sc);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].h == Catch::Approx(std::sqrt(2.0) / 8.0).epsilon(1e-14));
  CHECK(rows[1].h == Catch::Approx(std::sqrt(2.0) / 16.0).epsilon(1e-14));
  CHECK(rows[0].l2_error > rows[1].l2_error);
  CHECK(rows[0].eoc_l2 == Catch::Approx(2.0).margin(0.2));
  CHECK(std::isnan(rows[1].eoc_l2));
  CHECK(rows[0].ssn_iterations >= 1);
  CHECK(rows[0].seconds > 0.0);
}

TEST_CASE("parallel study runs are deterministic replicas of the serial run") {
  StudyConfig serial;
  serial.ms = {8, 12};
  StudyConfig parallel = serial;
  parallel.parallelism = 2;
  const auto a = run_study(serial);
  const auto b = run_study(parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].h == b[i].h);
    CHECK(a[i].l2_error == Catch::Approx(b[i].l2_error).epsilon(1e-12));
    CHECK(a[i].linf_error == Catch::Approx(b[i].linf_error).epsilon(1e-12));
    CHECK(a[i].ssn_iterations == b[i].ssn_iterations);
  }
}

TEST_CASE("config parser handles numbers, strings, arrays, and inline tables") {
  const Config cfg = Config::parse(
      "# comment line\n"
      "problem = \"example1\"  # trailing comment\n"
      "rtol = 1e-8\n"
      "m = [8, 16, 32]\n"
      "a = { kind = \"max\", shift = 1.0 }\n"
      "\n");
  CHECK(cfg.string("problem") == "example1");
  CHECK(cfg.number("rtol") == 1e-8);
  CHECK(cfg.number_or("missing", 7.0) == 7.0);
  CHECK(cfg.string_or("missing", "dflt") == "dflt");
  const auto m = cfg.array("m");
  REQUIRE(m.size() == 3);
  CHECK(m[0] == 8.0);
  CHECK(m[2] == 32.0);
  const auto tbl = cfg.table("a");
  CHECK(std::get<std::string>(tbl.at("kind")) == "max");
  CHECK(std::get<double>(tbl.at("shift")) == 1.0);
  CHECK_FALSE(cfg.has("missing"));
  CHECK_THROWS_AS(cfg.number("missing"), ConfigError);
  CHECK_THROWS_AS(Config::parse("just a line\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = \"open\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = notanumber\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_file("no_such_file.toml"), ConfigError);
}

TEST_CASE("coefficient tables build the expected piecewise branches") {
  const Config cfg = Config::parse(
      "a = { kind = \"max\", shift = 1.0 }\n"
      "b = { kind = \"pc1\", lo = [0], hi = [-2, 2], kink = 1.0 }\n"
      "c = { kind = \"bogus\" }\n");
  const PC1Coeff a = coeff_from_config(cfg.table("a"));
  CHECK(a.kink() == 1.0);
  CHECK(a.eval(0.5) == 0.0);
  CHECK(a.eval(1.5) == Catch::Approx(0.5));
  CHECK(a.sigma0() == 1.0);
  const PC1Coeff b = coeff_from_config(cfg.table("b"));
  CHECK(b.kink() == 1.0);
  CHECK(b.eval(2.0) == Catch::Approx(2.0));
  CHECK(b.sigma0() == 2.0);
  CHECK_THROWS_AS(coeff_from_config(cfg.table("c")), ConfigError);
  CHECK_THROWS_AS(coeff_from_config({}), ConfigError);
}

TEST_CASE("study configuration is read from config keys with n as mesh shorthand") {
  const StudyConfig sc =
      study_config_from(Config::parse("m = [8, 16]\nrtol = 1e-9\nparallelism = 2\n"));
  REQUIRE(sc.ms.size() == 2);
  CHECK(sc.ms[0] == 8);
  CHECK(sc.ms[1] == 16);
  CHECK(sc.rtol == 1e-9);
  CHECK(sc.parallelism == 2);
  CHECK_FALSE(sc.iterative_solver);

  const StudyConfig sn = study_config_from(Config::parse("n = [1, 2, 3]\n"));
  REQUIRE(sn.ms.size() == 3);
  CHECK(sn.ms[0] == 100);
  CHECK(sn.ms[1] == 200);
  CHECK(sn.ms[2] == 300);

  const StudyConfig sd = study_config_from(Config::parse("iterative_solver = 1\n"));
  CHECK(sd.ms == std::vector<int>{100, 200, 300, 400, 500});
  CHECK(sd.iterative_solver);
}

TEST_CASE("interpolant fields agree with the exact function at the nodes") {
  const TriMesh mesh = uniform_unit_square(7);
  const ScalarField f = [](double a, double b) { return exact_example("u", a, b); };
  const ScalarField fh = interpolant_field(mesh, f);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const auto& x = mesh.vertices[v];
    CHECK(fh(x[0], x[1]) == Catch::Approx(f(x[0], x[1])).margin(1e-12));
  }
  const ScalarField uref = example_control_reference(mesh);
  CHECK(uref(0.5 + 1e-12, 0.5) == Catch::Approx(2.0 * kPi * kPi).epsilon(0.05));
}
