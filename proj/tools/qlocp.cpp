// Command-line driver: convergence studies, single solves, and the
// nonsmooth-structure diagnostics (jump functional, band measure, curvature).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "qlocp/config.hpp"
#include "qlocp/geometry.hpp"
#include "qlocp/harness.hpp"

namespace {

constexpr int kExitSolver = 2;
constexpr int kExitConfig = 3;

qlocp::AnalyticField field_by_name(const std::string& name) {
  if (name == "sinsin") return qlocp::AnalyticField::sinsin();
  if (name == "x1") return qlocp::AnalyticField::affine(1.0, 0.0, 0.0);
  throw qlocp::ConfigError("unknown field '" + name + "' (expected sinsin or x1)");
}

double sinsin_sigma_reference(double tbar) {
  if (tbar == 1.0) return 0.0;
  if (tbar == 0.0) return 4.0;
  return 8.0 * (1.0 - 2.0 / qlocp::kPi * std::asin(tbar));
}

int cmd_study(const std::string& config_path, const std::string& out) {
  qlocp::StudyConfig sc;
  try {
    sc = qlocp::study_config_from(qlocp::Config::parse_file(config_path));
    if (!out.empty()) sc.out_csv = out;
    sc.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const auto rows = qlocp::run_study(sc);
    for (const auto& r : rows) {
      std::cout << "h=" << qlocp::format_full(r.h) << " l2=" << qlocp::format_full(r.l2_error)
                << " linf=" << qlocp::format_full(r.linf_error)
                << " ssn_iters=" << r.ssn_iterations << " seconds=" << r.seconds << "\n";
    }
  } catch (const qlocp::StudyError& e) {
    std::cerr << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}

int cmd_solve(const std::string& problem, int m, const std::string& dump_dir) {
  if (problem != "example1") {
    std::cerr << "config error: unknown problem '" << problem << "'\n";
    return kExitConfig;
  }
  const qlocp::TriMesh mesh = qlocp::uniform_unit_square(m);
  const qlocp::OcpSpec spec = qlocp::example_spec_h(mesh);
  const qlocp::OcpSolution sol =
      qlocp::ssn_solve(spec, mesh, qlocp::example_start(mesh), qlocp::FeFunction(mesh));
  std::cout << "ssn_iterations=" << sol.ssn_iterations
            << " converged=" << (sol.converged ? 1 : 0)
            << " residual=" << sol.residual_history.back() << "\n";
  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    std::ofstream ms(dump_dir + "/mesh.txt");
    qlocp::dump_mesh(mesh, ms);
    std::ofstream ys(dump_dir + "/y.txt");
    qlocp::dump_field(sol.y_h, ys);
    std::ofstream ps(dump_dir + "/phi.txt");
    qlocp::dump_field(sol.phi_h, ps);
    std::ofstream us(dump_dir + "/control.txt");
    qlocp::dump_control_samples(sol, mesh, us);
  }
  return sol.converged ? 0 : kExitSolver;
}

int cmd_jump(const std::string& field, double tbar, double sigma0,
             const std::vector<double>& rs) {
  const qlocp::AnalyticField f = field_by_name(field);
  const std::vector<double> radii = rs.empty() ? qlocp::default_sigma_radii() : rs;
  const auto est = qlocp::estimate_sigma(f, tbar, sigma0, radii);
  std::cout << "r,sigma_r,extrapolated\n";
  for (std::size_t i = 0; i < est.rs.size(); ++i) {
    std::cout << qlocp::format_full(est.rs[i]) << "," << qlocp::format_full(est.sigma_rs[i])
              << "," << (i + 1 == est.rs.size() ? qlocp::format_full(est.extrapolated) : "")
              << "\n";
  }
  if (field == "sinsin")
    std::cout << "# closed-form reference: "
              << qlocp::format_full(sigma0 * sinsin_sigma_reference(tbar)) << "\n";
  if (est.diverging) std::cout << "# warning: sigma_r appears to diverge as r -> 0\n";
  return 0;
}

int cmd_band(const std::string& field, double tbar, const std::vector<double>& rs) {
  const qlocp::AnalyticField f = field_by_name(field);
  std::cout << "r,band_measure,measure_over_r\n";
  for (double r : rs) {
    const double m = qlocp::band_measure(f, tbar, r);
    std::cout << qlocp::format_full(r) << "," << qlocp::format_full(m) << ","
              << qlocp::format_full(m / r) << "\n";
  }
  return 0;
}

int cmd_curvature(const std::string& problem, int m, const std::string& direction) {
  if (problem != "example1") {
    std::cerr << "config error: unknown problem '" << problem << "'\n";
    return kExitConfig;
  }
  const qlocp::OcpSpec spec = qlocp::example_spec();
  const qlocp::TriMesh mesh = qlocp::uniform_unit_square(m);
  const qlocp::FeFunction y = qlocp::interpolate(mesh, [](double x1, double x2) {
    return qlocp::exact_example("y", x1, x2);
  });
  const qlocp::FeFunction phi = qlocp::interpolate(mesh, [](double x1, double x2) {
    return qlocp::exact_example("phi", x1, x2);
  });
  qlocp::ScalarField v;
  if (direction == "sinsin") {
    v = [](double x1, double x2) {
      return std::sin(qlocp::kPi * x1) * std::sin(qlocp::kPi * x2);
    };
  } else {
    // "k,l" selects the Fourier mode sin(k pi x1) sin(l pi x2).
    const auto comma = direction.find(',');
    if (comma == std::string::npos) {
      std::cerr << "config error: direction must be 'sinsin' or 'k,l'\n";
      return kExitConfig;
    }
    const int k = std::stoi(direction.substr(0, comma));
    const int l = std::stoi(direction.substr(comma + 1));
    v = [k, l](double x1, double x2) {
      return std::sin(k * qlocp::kPi * x1) * std::sin(l * qlocp::kPi * x2);
    };
  }
  const auto q = qlocp::q_total(spec, mesh, y, phi, v);
  std::cout << "Q_s=" << qlocp::format_full(q.q_smooth)
            << " Q_1=" << qlocp::format_full(q.q_first)
            << " Q_2=" << qlocp::format_full(q.q_second)
            << " Q=" << qlocp::format_full(q.total) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonsmooth quasilinear elliptic optimal control toolbox"};
  app.require_subcommand(1);

  auto* study = app.add_subcommand("study", "run a convergence study from a config file");
  std::string config_path, out_csv;
  study->add_option("--config", config_path, "study configuration file")->required();
  study->add_option("--out", out_csv, "output CSV path");

  auto* solve = app.add_subcommand("solve", "solve one instance and optionally dump fields");
  std::string problem = "example1", dump_dir;
  int m = 100;
  solve->add_option("--problem", problem, "problem id");
  solve->add_option("--m", m, "mesh subdivisions per side")->required();
  solve->add_option("--dump", dump_dir, "directory for field dumps");

  auto* jump = app.add_subcommand("jump", "jump-functional estimate on an analytic field");
  std::string field = "sinsin";
  double tbar = 0.5, sigma0 = 1.0;
  std::vector<double> rs;
  jump->add_option("--field", field, "field id (sinsin, x1)");
  jump->add_option("--tbar", tbar, "level value");
  jump->add_option("--sigma0", sigma0, "slope gap weight");
  jump->add_option("--rs", rs, "band radii (decreasing)");

  auto* band = app.add_subcommand("band", "band measure of an analytic field");
  std::string bfield = "sinsin";
  double btbar = 1.0;
  std::vector<double> brs;
  band->add_option("--field", bfield, "field id (sinsin, x1)");
  band->add_option("--tbar", btbar, "level value");
  band->add_option("--rs", brs, "band radii")->required();

  auto* curv = app.add_subcommand("curvature", "curvature breakdown at the benchmark data");
  std::string cproblem = "example1", direction = "sinsin";
  int cm = 100;
  curv->add_option("--problem", cproblem, "problem id");
  curv->add_option("--m", cm, "mesh subdivisions per side")->required();
  curv->add_option("--direction", direction, "direction field (sinsin or k,l)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (study->parsed()) return cmd_study(config_path, out_csv);
    if (solve->parsed()) return cmd_solve(problem, m, dump_dir);
    if (jump->parsed()) return cmd_jump(field, tbar, sigma0, rs);
    if (band->parsed()) return cmd_band(bfield, btbar, brs);
    if (curv->parsed()) return cmd_curvature(cproblem, cm, direction);
  } catch (const qlocp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}
