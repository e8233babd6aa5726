#ifndef QLOCP_PDE_HPP
#define QLOCP_PDE_HPP

#include <cmath>
#include <functional>
#include <ostream>
#include <vector>

#include "qlocp/assembly.hpp"

namespace qlocp {

struct StateSolveOptions {
  double rtol = 1e-11;
  int max_iter = 50;
  bool damping = true;
  int quad_degree = 2;
  SolverOptions linear;
};

struct StateSolveReport {
  int iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
};

namespace detail {

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline std::vector<double> state_residual(const TriMesh& mesh, const PC1Coeff* coeff,
                                          const ScalarField& b_field, const FeFunction& y,
                                          const std::vector<double>& rhs, int quad_degree) {
  const SparseMatrix A = stiffness_weighted(mesh, coeff, b_field, y, quad_degree);
  std::vector<double> r = A.matvec(y.values);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= rhs[i];
  return r;
}

}  // namespace detail

/// Newton iteration for the discrete quasilinear state equation with the
/// linearized operator as Jacobian and optional residual-decrease damping.
inline std::pair<FeFunction, StateSolveReport> solve_state(
    const TriMesh& mesh, const PC1Coeff* coeff, const ScalarField& b_field,
    const std::vector<double>& rhs, const StateSolveOptions& opts = {},
    const FeFunction* warm_start = nullptr) {
  FeFunction y = warm_start ? *warm_start : FeFunction(mesh);
  StateSolveReport report;
  const double rhs_norm = detail::norm2(rhs);
  const double tol = opts.rtol * std::max(1.0, rhs_norm);
  std::vector<double> r = detail::state_residual(mesh, coeff, b_field, y, rhs, opts.quad_degree);
  double rnorm = detail::norm2(r);
  report.residual_history.push_back(rnorm);
  while (rnorm > tol && report.iterations < opts.max_iter) {
    SparseMatrix D = coeff ? dh_operator(mesh, *coeff, b_field, y, opts.quad_degree)
                           : stiffness_weighted(mesh, nullptr, b_field, y, opts.quad_degree);
    std::vector<double> neg_r(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) neg_r[i] = -r[i];
    const std::vector<double> delta = solve(D, neg_r, opts.linear);
    double step = 1.0;
    FeFunction trial = y;
    std::vector<double> r_trial;
    double rnorm_trial = 0.0;
    for (int halvings = 0;; ++halvings) {
      for (std::size_t i = 0; i < trial.values.size(); ++i)
        trial.values[i] = y.values[i] + step * delta[i];
      r_trial = detail::state_residual(mesh, coeff, b_field, trial, rhs, opts.quad_degree);
      rnorm_trial = detail::norm2(r_trial);
      if (!opts.damping || rnorm_trial < rnorm || halvings >= 20) break;
      step *= 0.5;
    }
    y = trial;
    r = std::move(r_trial);
    rnorm = rnorm_trial;
    report.residual_history.push_back(rnorm);
    ++report.iterations;
  }
  report.converged = rnorm <= tol;
  return {std::move(y), std::move(report)};
}

inline std::pair<FeFunction, StateSolveReport> solve_state(
    const TriMesh& mesh, const PC1Coeff* coeff, const ScalarField& b_field,
    const ScalarField& u, const StateSolveOptions& opts = {},
    const FeFunction* warm_start = nullptr) {
  return solve_state(mesh, coeff, b_field, load(mesh, u, opts.quad_degree), opts, warm_start);
}

/// Solves D_{h,y} z = load(v) for a converged state y.
inline FeFunction solve_linearized(const TriMesh& mesh, const PC1Coeff& coeff,
                                   const ScalarField& b_field, const FeFunction& y,
                                   const ScalarField& v, int quad_degree = 2,
                                   const SolverOptions& lin = {}) {
  const SparseMatrix D = dh_operator(mesh, coeff, b_field, y, quad_degree);
  return FeFunction(*y.mesh, solve(D, load(mesh, v, quad_degree), lin));
}

/// Solves the discrete adjoint equation: the system matrix is exactly the
/// transpose of the linearized operator.
inline FeFunction solve_adjoint(const TriMesh& mesh, const PC1Coeff& coeff,
                                const ScalarField& b_field, const FeFunction& y,
                                const ScalarField& rhs, int quad_degree = 2,
                                const SolverOptions& lin = {}) {
  const SparseMatrix Dt = dh_operator(mesh, coeff, b_field, y, quad_degree).transpose();
  return FeFunction(*y.mesh, solve(Dt, load(mesh, rhs, quad_degree), lin));
}

}  // namespace qlocp

#endif
