#ifndef QLOCP_MESH_HPP
#define QLOCP_MESH_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace qlocp {

using Point2 = std::array<double, 2>;

/// Structured conforming triangulation of the unit square.
///
/// An m-by-m grid of squares, each split along the bottom-left-to-top-right
/// diagonal. Vertices are numbered row-major; triangles are oriented
/// counterclockwise. The criss-cross P1 stiffness of this mesh equals the
/// classic 5-point stencil, which keeps small instances hand-checkable.
struct TriMesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<char> boundary_mask;  // true iff vertex lies on the boundary
  int subdivisions = 0;             // cells per side
  double h = 0.0;                   // mesh size, sqrt(2)/m

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double tri_area(int t) const {
    const auto& tri = triangles[t];
    const Point2& a = vertices[tri[0]];
    const Point2& b = vertices[tri[1]];
    const Point2& c = vertices[tri[2]];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
  }

  Point2 bary_point(int t, const std::array<double, 3>& lambda) const {
    const auto& tri = triangles[t];
    Point2 p{0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      p[0] += lambda[k] * vertices[tri[k]][0];
      p[1] += lambda[k] * vertices[tri[k]][1];
    }
    return p;
  }
};

inline TriMesh uniform_unit_square(int m) {
  if (m < 1) throw std::invalid_argument("uniform_unit_square: m must be >= 1");
  TriMesh mesh;
  mesh.subdivisions = m;
  mesh.h = std::sqrt(2.0) / m;
  const int nside = m + 1;
  mesh.vertices.resize(static_cast<std::size_t>(nside) * nside);
  mesh.boundary_mask.resize(mesh.vertices.size());
  for (int j = 0; j < nside; ++j) {
    for (int i = 0; i < nside; ++i) {
      const int v = j * nside + i;
      mesh.vertices[v] = {static_cast<double>(i) / m, static_cast<double>(j) / m};
      mesh.boundary_mask[v] = (i == 0 || i == m || j == 0 || j == m) ? 1 : 0;
    }
  }
  mesh.triangles.reserve(static_cast<std::size_t>(2) * m * m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const int bl = j * nside + i;
      const int br = bl + 1;
      const int tl = bl + nside;
      const int tr = tl + 1;
      mesh.triangles.push_back({bl, br, tr});
      mesh.triangles.push_back({bl, tr, tl});
    }
  }
  return mesh;
}

/// Constant gradients of the three nodal P1 basis functions on a triangle.
/// The three vectors sum to zero (partition of unity).
inline std::array<Point2, 3> p1_gradients(const TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles.at(static_cast<std::size_t>(t));
  const Point2& a = mesh.vertices[tri[0]];
  const Point2& b = mesh.vertices[tri[1]];
  const Point2& c = mesh.vertices[tri[2]];
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
  std::array<Point2, 3> g;
  g[0] = {(b[1] - c[1]) / det, (c[0] - b[0]) / det};
  g[1] = {(c[1] - a[1]) / det, (a[0] - c[0]) / det};
  g[2] = {(a[1] - b[1]) / det, (b[0] - a[0]) / det};
  return g;
}

/// Quadrature rule on the reference triangle in barycentric coordinates.
/// Weights are relative to the triangle area and sum to 1.
struct QuadRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;
};

inline QuadRule quad_rule(int degree) {
  QuadRule q;
  q.degree = degree;
  switch (degree) {
    case 1:
      q.points = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
      q.weights = {1.0};
      break;
    case 2:
      q.points = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                  {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                  {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};
      q.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
      break;
    case 4: {
      const double a1 = 0.445948490915965;
      const double a2 = 0.091576213509771;
      const double w1 = 0.223381589678011;
      const double w2 = 0.109951743655322;
      q.points = {{1.0 - 2.0 * a1, a1, a1}, {a1, 1.0 - 2.0 * a1, a1},
                  {a1, a1, 1.0 - 2.0 * a1}, {1.0 - 2.0 * a2, a2, a2},
                  {a2, 1.0 - 2.0 * a2, a2}, {a2, a2, 1.0 - 2.0 * a2}};
      q.weights = {w1, w1, w1, w2, w2, w2};
      break;
    }
    default:
      throw std::invalid_argument("quad_rule: supported degrees are 1, 2, 4");
  }
  return q;
}

/// Plain-text dump: m, then `x y boundary_flag` per vertex, then `i j k`
/// per triangle, in construction order.
inline void dump_mesh(const TriMesh& mesh, std::ostream& os) {
  os << mesh.subdivisions << "\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    os << mesh.vertices[v][0] << " " << mesh.vertices[v][1] << " "
       << static_cast<int>(mesh.boundary_mask[v]) << "\n";
  }
  for (const auto& tri : mesh.triangles) {
    os << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  }
}

}  // namespace qlocp

#endif
