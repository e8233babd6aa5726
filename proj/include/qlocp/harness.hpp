#ifndef QLOCP_HARNESS_HPP
#define QLOCP_HARNESS_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "qlocp/geometry.hpp"
#include "qlocp/ocp.hpp"

namespace qlocp {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kExampleNu = 1e-4;

/// Closed-form data of the benchmark problem: state equation coefficient
/// 1 + max(y - 1, 0), tracking cost, box [0, 2 pi^2], nu = 1e-4.
inline double exact_example(const std::string& field, double x1, double x2) {
  const double ss = std::sin(kPi * x1) * std::sin(kPi * x2);
  if (field == "y") return ss;
  if (field == "u") return 2.0 * kPi * kPi * ss;
  if (field == "phi") return -kExampleNu * 2.0 * kPi * kPi * ss;
  if (field == "y_d") return (1.0 + 4.0 * kExampleNu * kPi * kPi * kPi * kPi) * ss;
  throw std::invalid_argument("exact_example: unknown field '" + field + "'");
}

inline OcpSpec example_spec() {
  return OcpSpec(kExampleNu, 0.0, 2.0 * kPi * kPi, PC1Coeff::max_type(1.0),
                 [](double, double) { return 1.0; },
                 [](double x1, double x2) { return exact_example("y_d", x1, x2); });
}

/// The SSN starting state prescribed for the benchmark runs.
inline FeFunction example_start(const TriMesh& mesh) {
  return l2_project(mesh, [](double x1, double x2) {
    return 32.0 * x1 * x2 * (1.0 - x1) * (1.0 - x2);
  });
}

/// Self-contained evaluator of the nodal interpolant of f on the mesh. The
/// mesh must outlive the returned field; the nodal values are owned by it.
inline ScalarField interpolant_field(const TriMesh& mesh, const ScalarField& f) {
  auto fe = std::make_shared<FeFunction>(interpolate(mesh, f));
  const AnalyticField af = field_from_fe(*fe);
  return [fe, val = af.value](double x1, double x2) { return val(x1, x2); };
}

/// Benchmark problem with the tracking target discretized by nodal
/// interpolation on the study mesh; the convergence table is produced with
/// this data discretization, and the reference control is compared as its
/// interpolant as well.
inline OcpSpec example_spec_h(const TriMesh& mesh) {
  return OcpSpec(kExampleNu, 0.0, 2.0 * kPi * kPi, PC1Coeff::max_type(1.0),
                 [](double, double) { return 1.0; },
                 interpolant_field(mesh, [](double x1, double x2) {
                   return exact_example("y_d", x1, x2);
                 }));
}

inline ScalarField example_control_reference(const TriMesh& mesh) {
  return interpolant_field(
      mesh, [](double x1, double x2) { return exact_example("u", x1, x2); });
}

/// L2 (degree-4 quadrature) and Linf (max over vertices and quadrature
/// points) errors of the recovered control against an exact function.
inline std::pair<double, double> error_norms(const OcpSolution& sol, const ScalarField& exact,
                                             const TriMesh& mesh) {
  const QuadRule q = quad_rule(4);
  double l2sq = 0.0, linf = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double d = sol.control_at(t, q.points[k]) - exact(x[0], x[1]);
      l2sq += area * q.weights[k] * d * d;
      linf = std::max(linf, std::abs(d));
    }
    // Vertex corners of the triangle (barycentric unit vectors).
    for (int k = 0; k < 3; ++k) {
      std::array<double, 3> lam{0.0, 0.0, 0.0};
      lam[k] = 1.0;
      const Point2& x = mesh.vertices[mesh.triangles[t][k]];
      linf = std::max(linf, std::abs(sol.control_at(t, lam) - exact(x[0], x[1])));
    }
  }
  return {std::sqrt(l2sq), linf};
}

inline std::pair<double, double> field_error_norms(const FeFunction& approx,
                                                   const ScalarField& exact) {
  const TriMesh& mesh = *approx.mesh;
  const QuadRule q = quad_rule(4);
  double l2sq = 0.0, linf = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double d = approx.at_bary(t, q.points[k]) - exact(x[0], x[1]);
      l2sq += area * q.weights[k] * d * d;
      linf = std::max(linf, std::abs(d));
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    linf = std::max(linf, std::abs(approx.values[v] -
                                   exact(mesh.vertices[v][0], mesh.vertices[v][1])));
  return {std::sqrt(l2sq), linf};
}

/// Experimental orders of convergence between consecutive rows.
inline std::vector<double> eoc(const std::vector<double>& errors,
                               const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2)
    throw std::invalid_argument("eoc: need equal-length lists with >= 2 entries");
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    if (errors[i] <= 0.0 || errors[i + 1] <= 0.0)
      throw std::invalid_argument("eoc: errors must be positive");
    out.push_back(std::log(errors[i + 1] / errors[i]) / std::log(hs[i + 1] / hs[i]));
  }
  return out;
}

struct StudyConfig {
  std::string problem = "example1";
  std::vector<int> ms;  // mesh subdivisions, strictly increasing
  double rtol = 1e-10;
  int max_iter = 30;
  std::string out_csv;
  int parallelism = 1;
  bool iterative_solver = false;

  void validate() const {
    if (ms.empty()) throw std::invalid_argument("StudyConfig: empty mesh list");
    for (std::size_t i = 1; i < ms.size(); ++i)
      if (ms[i] <= ms[i - 1])
        throw std::invalid_argument("StudyConfig: mesh list must be strictly increasing");
    if (ms.front() < 1) throw std::invalid_argument("StudyConfig: m must be >= 1");
  }
};

struct StudyRow {
  double h = 0.0;
  double l2_error = 0.0;
  double linf_error = 0.0;
  double eoc_l2 = std::nan("");   // blank on last row
  double eoc_linf = std::nan("");
  int ssn_iterations = 0;
  double seconds = 0.0;
};

class StudyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_study_csv(const std::vector<StudyRow>& rows, const std::string& path) {
  std::ofstream os(path);
  os << "h,l2_error,linf_error,eoc_l2,eoc_linf,ssn_iters,seconds\n";
  for (const auto& r : rows) {
    os << format_full(r.h) << "," << format_full(r.l2_error) << ","
       << format_full(r.linf_error) << ","
       << (std::isnan(r.eoc_l2) ? "" : format_full(r.eoc_l2)) << ","
       << (std::isnan(r.eoc_linf) ? "" : format_full(r.eoc_linf)) << ","
       << r.ssn_iterations << "," << format_full(r.seconds) << "\n";
  }
}

inline std::vector<StudyRow> parse_study_csv(const std::string& path) {
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<StudyRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    StudyRow r;
    std::stringstream ss(line);
    std::string tok;
    auto next = [&]() {
      std::getline(ss, tok, ',');
      return tok;
    };
    r.h = std::stod(next());
    r.l2_error = std::stod(next());
    r.linf_error = std::stod(next());
    tok = next();
    r.eoc_l2 = tok.empty() ? std::nan("") : std::stod(tok);
    tok = next();
    r.eoc_linf = tok.empty() ? std::nan("") : std::stod(tok);
    r.ssn_iterations = std::stoi(next());
    r.seconds = std::stod(next());
    rows.push_back(r);
  }
  return rows;
}

/// Runs the convergence study: one SSN solve per mesh from the prescribed
/// starting point, error norms against the closed-form control, then the
/// EOC columns. Rows are ordered by decreasing h regardless of completion
/// order; failures abort with a partial CSV.
inline std::vector<StudyRow> run_study(const StudyConfig& config) {
  config.validate();
  if (config.problem != "example1")
    throw StudyError("run_study: unknown problem '" + config.problem + "'");

  auto run_one = [&](int m) {
    const auto t0 = std::chrono::steady_clock::now();
    const TriMesh mesh = uniform_unit_square(m);
    const OcpSpec spec = example_spec_h(mesh);
    SsnOptions opts;
    opts.rtol = config.rtol;
    opts.max_iter = config.max_iter;
    if (config.iterative_solver) opts.linear.method = SolverOptions::Method::BiCGStab;
    const OcpSolution sol = ssn_solve(spec, mesh, example_start(mesh), FeFunction(mesh), opts);
    StudyRow row;
    row.h = mesh.h;
    row.ssn_iterations = sol.ssn_iterations;
    if (sol.converged) {
      auto [l2, linf] = error_norms(sol, example_control_reference(mesh), mesh);
      row.l2_error = l2;
      row.linf_error = linf;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(row, sol.converged);
  };

  std::vector<std::pair<StudyRow, bool>> results(config.ms.size());
  if (config.parallelism <= 1) {
    for (std::size_t i = 0; i < config.ms.size(); ++i) results[i] = run_one(config.ms[i]);
  } else {
    std::vector<std::future<std::pair<StudyRow, bool>>> futs;
    for (int m : config.ms)
      futs.push_back(std::async(std::launch::async, run_one, m));
    for (std::size_t i = 0; i < futs.size(); ++i) results[i] = futs[i].get();
  }

  std::vector<StudyRow> rows;
  bool failed = false;
  for (auto& [row, ok] : results) {
    if (!ok) {
      failed = true;
      break;
    }
    rows.push_back(row);
  }
  if (rows.size() >= 2) {
    std::vector<double> l2s, linfs, hs;
    for (const auto& r : rows) {
      l2s.push_back(r.l2_error);
      linfs.push_back(r.linf_error);
      hs.push_back(r.h);
    }
    const auto e2 = eoc(l2s, hs);
    const auto einf = eoc(linfs, hs);
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      rows[i].eoc_l2 = e2[i];
      rows[i].eoc_linf = einf[i];
    }
  }
  if (!config.out_csv.empty()) write_study_csv(rows, config.out_csv);
  if (failed)
    throw StudyError("run_study: SSN failed to converge on a mesh; partial CSV written");
  return rows;
}

inline void dump_field(const FeFunction& f, std::ostream& os) {
  for (double v : f.values) os << format_full(v) << "\n";
}

inline void dump_control_samples(const OcpSolution& sol, const TriMesh& mesh,
                                 std::ostream& os) {
  if (sol.control_kind == ControlKind::PiecewiseConstant) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const Point2 c = mesh.bary_point(t, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      os << format_full(c[0]) << " " << format_full(c[1]) << " "
         << format_full(sol.u_tri[t]) << "\n";
    }
    return;
  }
  const QuadRule q = quad_rule(4);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      os << format_full(x[0]) << " " << format_full(x[1]) << " "
         << format_full(sol.control_at(t, q.points[k])) << "\n";
    }
  }
}

}  // namespace qlocp

#endif
