#ifndef QLOCP_OCP_HPP
#define QLOCP_OCP_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qlocp/pde.hpp"

namespace qlocp {

/// Pointwise cost integrand L(x, y) with its first two y-derivatives.
struct CostIntegrand {
  std::function<double(double, double, double)> value;  // (x1, x2, y)
  std::function<double(double, double, double)> dy;
  std::function<double(double, double, double)> dyy;

  static CostIntegrand tracking(ScalarField y_d) {
    return {[y_d](double x1, double x2, double y) {
              const double d = y - y_d(x1, x2);
              return 0.5 * d * d;
            },
            [y_d](double x1, double x2, double y) { return y - y_d(x1, x2); },
            [](double, double, double) { return 1.0; }};
  }
};

struct OcpSpec {
  double nu;
  double alpha, beta;
  PC1Coeff coeff;
  ScalarField b_field;
  CostIntegrand cost;
  ScalarField y_d;

  OcpSpec(double nu_, double alpha_, double beta_, PC1Coeff coeff_, ScalarField b,
          ScalarField yd)
      : nu(nu_),
        alpha(alpha_),
        beta(beta_),
        coeff(std::move(coeff_)),
        b_field(std::move(b)),
        cost(CostIntegrand::tracking(yd)),
        y_d(std::move(yd)) {
    if (nu <= 0.0) throw std::invalid_argument("OcpSpec: nu must be positive");
    if (alpha > beta) throw std::invalid_argument("OcpSpec: alpha must not exceed beta");
  }
};

inline double project_box(double v, double alpha, double beta) {
  return std::min(beta, std::max(alpha, v));
}

/// Reduced objective j_h(u); the rhs of the state equation, the cost and
/// the regularizer all use the degree-4 rule so that the adjoint-based
/// derivative is exact for the discrete objective.
inline double objective(const OcpSpec& spec, const TriMesh& mesh, const ScalarField& u,
                        StateSolveOptions opts = {}) {
  opts.rtol = std::min(opts.rtol, 1e-12);
  auto [y, report] = solve_state(mesh, &spec.coeff, spec.b_field, load(mesh, u, 4), opts);
  if (!report.converged) throw std::runtime_error("objective: state solve did not converge");
  const QuadRule q = quad_rule(4);
  double j = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double uv = u(x[0], x[1]);
      j += area * q.weights[k] *
           (spec.cost.value(x[0], x[1], y.at_bary(t, q.points[k])) +
            0.5 * spec.nu * uv * uv);
    }
  }
  return j;
}

struct GradientField {
  FeFunction phi;
  ScalarField u;
  double nu;

  double eval(double x1, double x2, int tri, const std::array<double, 3>& lambda) const {
    return phi.at_bary(tri, lambda) + nu * u(x1, x2);
  }
};

inline GradientField gradient_field(const OcpSpec& spec, const TriMesh& mesh,
                                    const ScalarField& u, StateSolveOptions opts = {}) {
  opts.rtol = std::min(opts.rtol, 1e-12);
  auto [y, report] = solve_state(mesh, &spec.coeff, spec.b_field, load(mesh, u, 4), opts);
  if (!report.converged)
    throw std::runtime_error("gradient_field: state solve did not converge");
  // Adjoint rhs dL/dy(x, y_h(x)) needs the FE value of y at x; assemble the
  // load directly instead of routing through a ScalarField.
  const auto& cost = spec.cost;
  const QuadRule q = quad_rule(4);
  std::vector<double> b(mesh.num_vertices(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto& tri = mesh.triangles[t];
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double c =
          area * q.weights[k] * cost.dy(x[0], x[1], y.at_bary(t, q.points[k]));
      for (int i = 0; i < 3; ++i) b[tri[i]] += c * q.points[k][i];
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.boundary_mask[v]) b[v] = 0.0;
  const SparseMatrix Dt =
      dh_operator(mesh, spec.coeff, spec.b_field, y, 2).transpose();
  FeFunction phi(mesh, solve(Dt, b));
  return GradientField{std::move(phi), u, spec.nu};
}

/// Directional derivative j_h'(u)v evaluated by degree-4 quadrature of
/// (phi_h + nu u) v.
inline double gradient_dir(const GradientField& g, const TriMesh& mesh, const ScalarField& v) {
  const QuadRule q = quad_rule(4);
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      s += area * q.weights[k] * g.eval(x[0], x[1], t, q.points[k]) * v(x[0], x[1]);
    }
  }
  return s;
}

struct SsnOptions {
  double rtol = 1e-10;
  int max_iter = 30;
  int quad_degree = 2;
  bool damping = true;
  SolverOptions linear;
};

enum class ControlKind { Variational, PiecewiseConstant };

struct OcpSolution {
  FeFunction y_h;
  FeFunction phi_h;
  ControlKind control_kind = ControlKind::Variational;
  std::vector<double> u_tri;  // per-triangle constants (piecewise-constant case)
  double nu = 0.0, alpha = 0.0, beta = 0.0;
  int ssn_iterations = 0;
  std::vector<int> active_set_history;
  std::vector<double> residual_history;
  bool converged = false;

  /// Control value at a point of a triangle: box projection of -phi/nu for
  /// the variational discretization, the triangle constant otherwise.
  double control_at(int tri, const std::array<double, 3>& lambda) const {
    if (control_kind == ControlKind::PiecewiseConstant) return u_tri[tri];
    return project_box(-phi_h.at_bary(tri, lambda) / nu, alpha, beta);
  }
};

namespace detail {

struct SsnWork {
  std::vector<double> residual;   // stacked (F1, F2), length 2n
  SparseBuilder jac;              // 2n x 2n
  int active_points = 0;
  SsnWork(int n2) : residual(n2, 0.0), jac(n2) {}
};

/// Residual and generalized Jacobian of the coupled optimality system.
/// Unknown layout: y dofs in [0, n), phi dofs in [n, 2n).
inline SsnWork ssn_system(const OcpSpec& spec, const TriMesh& mesh, const FeFunction& y,
                          const FeFunction& phi, ControlKind kind, int quad_degree,
                          bool want_jacobian) {
  const int n = mesh.num_vertices();
  SsnWork work(2 * n);
  const QuadRule q = quad_rule(quad_degree);
  const double nu = spec.nu;

  const SparseMatrix A = stiffness_weighted(mesh, &spec.coeff, spec.b_field, y, quad_degree);
  const SparseMatrix D = dh_operator(mesh, spec.coeff, spec.b_field, y, quad_degree);
  const SparseMatrix Dt = D.transpose();

  const std::vector<double> Ay = A.matvec(y.values);
  const std::vector<double> Dtphi = Dt.matvec(phi.values);
  for (int i = 0; i < n; ++i) {
    work.residual[i] = Ay[i];
    work.residual[n + i] = Dtphi[i];
  }

  // Control load in F1 and cost load in F2, plus the mass-type Jacobian
  // blocks that depend on the same quadrature data.
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto& tri = mesh.triangles[t];
    const Point2 gy = y.gradient_on(t);
    const Point2 gphi = phi.gradient_on(t);
    const auto g = p1_gradients(mesh, t);
    const double gy_gphi = gy[0] * gphi[0] + gy[1] * gphi[1];

    double u_T = 0.0;
    bool pc_inactive = false;
    if (kind == ControlKind::PiecewiseConstant) {
      const double mean_phi =
          (phi.values[tri[0]] + phi.values[tri[1]] + phi.values[tri[2]]) / 3.0;
      const double raw = -mean_phi / nu;
      u_T = project_box(raw, spec.alpha, spec.beta);
      pc_inactive = raw >= spec.alpha && raw <= spec.beta;
      if (!pc_inactive) ++work.active_points;
      for (int i = 0; i < 3; ++i) {
        if (mesh.boundary_mask[tri[i]]) continue;
        work.residual[tri[i]] -= u_T * area / 3.0;
        if (want_jacobian && pc_inactive) {
          for (int j = 0; j < 3; ++j) {
            if (mesh.boundary_mask[tri[j]]) continue;
            work.jac.add(tri[i], n + tri[j], area / (9.0 * nu));
          }
        }
      }
    }

    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double wq = area * q.weights[k];
      const double yv = y.at_bary(t, q.points[k]);
      const double phiv = phi.at_bary(t, q.points[k]);

      if (kind == ControlKind::Variational) {
        const double raw = -phiv / nu;
        const double uq = project_box(raw, spec.alpha, spec.beta);
        // Ties at the bounds count as inactive: the generalized derivative of
        // the projection is taken as 1/nu there. With the prescribed zero
        // adjoint start every point ties the lower bound, and the opposite
        // convention decouples the first step and stalls the iteration.
        const bool inactive = raw >= spec.alpha && raw <= spec.beta;
        if (!inactive) ++work.active_points;
        for (int i = 0; i < 3; ++i) {
          if (mesh.boundary_mask[tri[i]]) continue;
          work.residual[tri[i]] -= wq * uq * q.points[k][i];
          if (want_jacobian && inactive) {
            for (int j = 0; j < 3; ++j) {
              if (mesh.boundary_mask[tri[j]]) continue;
              work.jac.add(tri[i], n + tri[j],
                           (wq / nu) * q.points[k][i] * q.points[k][j]);
            }
          }
        }
      }

      const double dl = spec.cost.dy(x[0], x[1], yv);
      for (int i = 0; i < 3; ++i) {
        if (mesh.boundary_mask[tri[i]]) continue;
        work.residual[n + tri[i]] -= wq * dl * q.points[k][i];
      }

      if (want_jacobian) {
        const double slope = spec.coeff.slope_at(yv);
        const double curv = spec.coeff.curvature_at(yv);
        const double d2l = spec.cost.dyy(x[0], x[1], yv);
        for (int i = 0; i < 3; ++i) {
          if (mesh.boundary_mask[tri[i]]) continue;
          const double gphi_gi = gphi[0] * g[i][0] + gphi[1] * g[i][1];
          for (int j = 0; j < 3; ++j) {
            if (mesh.boundary_mask[tri[j]]) continue;
            // d F2 / d y: a'(y) dy grad(phi).grad(w) + a''(y) dy w grad(y).grad(phi)
            //           + a'(y) w grad(dy).grad(phi) - d2L/dy2 dy w
            double v = slope * q.points[k][j] * gphi_gi;
            v += curv * q.points[k][j] * q.points[k][i] * gy_gphi;
            v += slope * q.points[k][i] * (gphi[0] * g[j][0] + gphi[1] * g[j][1]);
            v -= d2l * q.points[k][i] * q.points[k][j];
            work.jac.add(n + tri[i], tri[j], wq * v);
          }
        }
      }
    }
  }

  for (int v = 0; v < n; ++v) {
    if (mesh.boundary_mask[v]) {
      work.residual[v] = y.values[v];
      work.residual[n + v] = phi.values[v];
    }
  }

  if (want_jacobian) {
    for (const auto& [i, j, v] : D.triples()) work.jac.add(i, j, v);
    for (const auto& [i, j, v] : Dt.triples()) work.jac.add(n + i, n + j, v);
  }
  return work;
}

}  // namespace detail

/// Semismooth Newton on the coupled discrete optimality system. The control
/// never carries its own basis: it enters through the box projection of
/// -phi/nu (variational) or of the per-triangle mean of -phi/nu (piecewise
/// constant), and the Jacobian uses the strict-inactive-set derivative of
/// the projection.
inline OcpSolution ssn_solve_impl(const OcpSpec& spec, const TriMesh& mesh,
                                  const FeFunction& y0, const FeFunction& phi0,
                                  ControlKind kind, const SsnOptions& opts) {
  const int n = mesh.num_vertices();
  OcpSolution sol;
  sol.y_h = y0;
  sol.phi_h = phi0;
  sol.control_kind = kind;
  sol.nu = spec.nu;
  sol.alpha = spec.alpha;
  sol.beta = spec.beta;

  auto residual_norm = [&](const FeFunction& y, const FeFunction& phi) {
    const auto w = detail::ssn_system(spec, mesh, y, phi, kind, opts.quad_degree, false);
    return detail::norm2(w.residual);
  };

  double rnorm = 0.0;
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    auto work = detail::ssn_system(spec, mesh, sol.y_h, sol.phi_h, kind,
                                   opts.quad_degree, true);
    rnorm = detail::norm2(work.residual);
    sol.residual_history.push_back(rnorm);
    sol.active_set_history.push_back(work.active_points);
    if (rnorm <= opts.rtol) {
      sol.converged = true;
      break;
    }
    if (iter == opts.max_iter) break;
    const SparseMatrix J = work.jac.finalize();
    std::vector<double> neg_r(work.residual.size());
    for (std::size_t i = 0; i < neg_r.size(); ++i) neg_r[i] = -work.residual[i];
    const std::vector<double> delta = solve(J, neg_r, opts.linear);
    double step = 1.0;
    FeFunction y_trial = sol.y_h, phi_trial = sol.phi_h;
    for (int halvings = 0;; ++halvings) {
      for (int i = 0; i < n; ++i) {
        y_trial.values[i] = sol.y_h.values[i] + step * delta[i];
        phi_trial.values[i] = sol.phi_h.values[i] + step * delta[n + i];
      }
      if (!opts.damping || residual_norm(y_trial, phi_trial) < rnorm || halvings >= 20) break;
      step *= 0.5;
    }
    sol.y_h = y_trial;
    sol.phi_h = phi_trial;
    ++sol.ssn_iterations;
  }

  if (kind == ControlKind::PiecewiseConstant) {
    sol.u_tri.resize(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles[t];
      const double mean_phi =
          (sol.phi_h.values[tri[0]] + sol.phi_h.values[tri[1]] + sol.phi_h.values[tri[2]]) /
          3.0;
      sol.u_tri[t] = project_box(-mean_phi / spec.nu, spec.alpha, spec.beta);
    }
  }
  return sol;
}

inline OcpSolution ssn_solve(const OcpSpec& spec, const TriMesh& mesh, const FeFunction& y0,
                             const FeFunction& phi0, const SsnOptions& opts = {}) {
  return ssn_solve_impl(spec, mesh, y0, phi0, ControlKind::Variational, opts);
}

inline OcpSolution solve_pc_control(const OcpSpec& spec, const TriMesh& mesh,
                                    const SsnOptions& opts = {}) {
  return ssn_solve_impl(spec, mesh, FeFunction(mesh), FeFunction(mesh),
                        ControlKind::PiecewiseConstant, opts);
}

}  // namespace qlocp

#endif
