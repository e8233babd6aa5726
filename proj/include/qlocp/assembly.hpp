#ifndef QLOCP_ASSEMBLY_HPP
#define QLOCP_ASSEMBLY_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "qlocp/coeff.hpp"
#include "qlocp/mesh.hpp"
#include "qlocp/sparse.hpp"

namespace qlocp {

using ScalarField = std::function<double(double, double)>;

/// Continuous piecewise-linear field as nodal values over mesh vertices.
struct FeFunction {
  const TriMesh* mesh = nullptr;
  std::vector<double> values;

  FeFunction() = default;
  explicit FeFunction(const TriMesh& m) : mesh(&m), values(m.num_vertices(), 0.0) {}
  FeFunction(const TriMesh& m, std::vector<double> v) : mesh(&m), values(std::move(v)) {
    if (static_cast<int>(values.size()) != m.num_vertices())
      throw std::invalid_argument("FeFunction: value count != vertex count");
  }

  double at_bary(int t, const std::array<double, 3>& lambda) const {
    const auto& tri = mesh->triangles[t];
    return lambda[0] * values[tri[0]] + lambda[1] * values[tri[1]] +
           lambda[2] * values[tri[2]];
  }

  Point2 gradient_on(int t) const {
    const auto g = p1_gradients(*mesh, t);
    const auto& tri = mesh->triangles[t];
    Point2 gr{0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      gr[0] += values[tri[k]] * g[k][0];
      gr[1] += values[tri[k]] * g[k][1];
    }
    return gr;
  }

  /// True when the nodal values vanish on the boundary (membership in V_h).
  bool in_vh() const {
    for (int v = 0; v < mesh->num_vertices(); ++v)
      if (mesh->boundary_mask[v] && values[v] != 0.0) return false;
    return true;
  }
};

inline FeFunction interpolate(const TriMesh& mesh, const ScalarField& f) {
  FeFunction u(mesh);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    u.values[v] = f(mesh.vertices[v][0], mesh.vertices[v][1]);
  return u;
}

/// Weighted stiffness matrix: entries of (b + a(y_h)) grad phi_j . grad phi_i
/// under the operator quadrature rule. Boundary rows and columns are reduced
/// to identity. Passing coeff == nullptr drops the a(y) contribution.
inline SparseMatrix stiffness_weighted(const TriMesh& mesh, const PC1Coeff* coeff,
                                       const ScalarField& b_field, const FeFunction& y,
                                       int quad_degree = 2) {
  const QuadRule q = quad_rule(quad_degree);
  SparseBuilder builder(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto g = p1_gradients(mesh, t);
    const auto& tri = mesh.triangles[t];
    double w = 0.0;
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      double c = b_field(x[0], x[1]);
      if (coeff) c += coeff->eval(y.at_bary(t, q.points[k]));
      w += q.weights[k] * c;
    }
    w *= area;
    for (int i = 0; i < 3; ++i) {
      if (mesh.boundary_mask[tri[i]]) continue;
      for (int j = 0; j < 3; ++j) {
        if (mesh.boundary_mask[tri[j]]) continue;
        builder.add(tri[i], tri[j], w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
      }
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.boundary_mask[v]) builder.add(v, v, 1.0);
  return builder.finalize();
}

/// Linearized state operator: the weighted stiffness plus the nonsymmetric
/// coupling block  int 1_{y != kink} a'(y) w  grad y . grad z dx
/// (row = test function z, column = trial function w).
inline SparseMatrix dh_operator(const TriMesh& mesh, const PC1Coeff& coeff,
                                const ScalarField& b_field, const FeFunction& y,
                                int quad_degree = 2) {
  const QuadRule q = quad_rule(quad_degree);
  SparseBuilder builder(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto g = p1_gradients(mesh, t);
    const auto& tri = mesh.triangles[t];
    const Point2 gy = y.gradient_on(t);
    double w = 0.0;
    std::array<double, 3> slope_w{0.0, 0.0, 0.0};  // weighted phi_j moments of a'(y)
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double yv = y.at_bary(t, q.points[k]);
      w += q.weights[k] * (b_field(x[0], x[1]) + coeff.eval(yv));
      const double s = coeff.slope_at(yv);
      for (int j = 0; j < 3; ++j) slope_w[j] += q.weights[k] * s * q.points[k][j];
    }
    w *= area;
    for (int i = 0; i < 3; ++i) {
      if (mesh.boundary_mask[tri[i]]) continue;
      const double gyi = gy[0] * g[i][0] + gy[1] * g[i][1];
      for (int j = 0; j < 3; ++j) {
        if (mesh.boundary_mask[tri[j]]) continue;
        double v = w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        v += area * slope_w[j] * gyi;
        builder.add(tri[i], tri[j], v);
      }
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.boundary_mask[v]) builder.add(v, v, 1.0);
  return builder.finalize();
}

/// Full P1 mass matrix (no boundary treatment); degree-2 quadrature is
/// exact for the bilinear products.
inline SparseMatrix mass(const TriMesh& mesh) {
  const QuadRule q = quad_rule(2);
  SparseBuilder builder(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double v = 0.0;
        for (std::size_t k = 0; k < q.points.size(); ++k)
          v += q.weights[k] * q.points[k][i] * q.points[k][j];
        builder.add(tri[i], tri[j], area * v);
      }
  }
  return builder.finalize();
}

/// Mass matrix with identity rows/columns at boundary vertices, for
/// L2 projections onto V_h.
inline SparseMatrix mass_dirichlet(const TriMesh& mesh) {
  const QuadRule q = quad_rule(2);
  SparseBuilder builder(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      if (mesh.boundary_mask[tri[i]]) continue;
      for (int j = 0; j < 3; ++j) {
        if (mesh.boundary_mask[tri[j]]) continue;
        double v = 0.0;
        for (std::size_t k = 0; k < q.points.size(); ++k)
          v += q.weights[k] * q.points[k][i] * q.points[k][j];
        builder.add(tri[i], tri[j], area * v);
      }
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.boundary_mask[v]) builder.add(v, v, 1.0);
  return builder.finalize();
}

/// Mass-type matrix weighted by a pointwise field, boundary rows/columns
/// reduced to identity-free zero (used inside Newton blocks).
inline SparseMatrix mass_weighted(const TriMesh& mesh, const std::function<double(double, double)>& w,
                                  int quad_degree = 2) {
  const QuadRule q = quad_rule(quad_degree);
  SparseBuilder builder(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto& tri = mesh.triangles[t];
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double c = area * q.weights[k] * w(x[0], x[1]);
      if (c == 0.0) continue;
      for (int i = 0; i < 3; ++i) {
        if (mesh.boundary_mask[tri[i]]) continue;
        for (int j = 0; j < 3; ++j) {
          if (mesh.boundary_mask[tri[j]]) continue;
          builder.add(tri[i], tri[j], c * q.points[k][i] * q.points[k][j]);
        }
      }
    }
  }
  return builder.finalize();
}

/// Load vector of int f phi_i dx by quadrature; boundary entries zeroed.
inline std::vector<double> load(const TriMesh& mesh, const ScalarField& f,
                                int quad_degree = 2) {
  const QuadRule q = quad_rule(quad_degree);
  std::vector<double> b(mesh.num_vertices(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const auto& tri = mesh.triangles[t];
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double c = area * q.weights[k] * f(x[0], x[1]);
      for (int i = 0; i < 3; ++i) b[tri[i]] += c * q.points[k][i];
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.boundary_mask[v]) b[v] = 0.0;
  return b;
}

/// L2 projection onto V_h (zero boundary values).
inline FeFunction l2_project(const TriMesh& mesh, const ScalarField& f) {
  const SparseMatrix M = mass_dirichlet(mesh);
  return FeFunction(mesh, solve(M, load(mesh, f, 4)));
}

}  // namespace qlocp

#endif
