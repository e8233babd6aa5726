#ifndef QLOCP_GEOMETRY_HPP
#define QLOCP_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qlocp/ocp.hpp"

namespace qlocp {

/// Scalar field with closed-form gradient and a Lipschitz bound for the
/// value, used by the adaptive band quadrature to certify that a cell lies
/// entirely inside or outside the band.
struct AnalyticField {
  std::function<double(double, double)> value;
  std::function<Point2(double, double)> grad;
  double lipschitz = 0.0;

  static AnalyticField sinsin() {
    const double pi = 3.14159265358979323846;
    return {[pi](double x1, double x2) { return std::sin(pi * x1) * std::sin(pi * x2); },
            [pi](double x1, double x2) {
              return Point2{pi * std::cos(pi * x1) * std::sin(pi * x2),
                            pi * std::sin(pi * x1) * std::cos(pi * x2)};
            },
            pi};
  }

  static AnalyticField affine(double a, double b, double c) {
    return {[=](double x1, double x2) { return a * x1 + b * x2 + c; },
            [=](double, double) { return Point2{a, b}; }, std::sqrt(a * a + b * b)};
  }
};

/// Wraps a P1 field as an analytic field via structured point location.
/// Experimental path for evaluating the band functionals on discrete states.
inline AnalyticField field_from_fe(const FeFunction& y) {
  const FeFunction* f = &y;
  const TriMesh* mesh = y.mesh;
  const int m = mesh->subdivisions;
  auto locate = [mesh, m](double x1, double x2) {
    const int i = std::min(m - 1, std::max(0, static_cast<int>(x1 * m)));
    const int j = std::min(m - 1, std::max(0, static_cast<int>(x2 * m)));
    const double lx = x1 * m - i, ly = x2 * m - j;
    const int cell = 2 * (j * m + i);
    return lx >= ly ? cell : cell + 1;  // below/above the bl-tr diagonal
  };
  double lip = 0.0;
  for (int t = 0; t < mesh->num_triangles(); ++t) {
    const Point2 g = y.gradient_on(t);
    lip = std::max(lip, std::hypot(g[0], g[1]));
  }
  return {[f, mesh, locate](double x1, double x2) {
            const int t = locate(x1, x2);
            const auto& tri = mesh->triangles[t];
            const Point2& a = mesh->vertices[tri[0]];
            const Point2 g = f->gradient_on(t);
            return f->values[tri[0]] + g[0] * (x1 - a[0]) + g[1] * (x2 - a[1]);
          },
          [f, locate](double x1, double x2) { return f->gradient_on(locate(x1, x2)); },
          lip};
}

namespace detail {

struct BandQuadOptions {
  int base_subdivisions = 8;
  int max_depth = 14;
};

/// Adaptive band quadrature over a triangle. The vertex values plus the
/// Lipschitz bound give a certified range of the field on the cell; certain
/// cells are integrated with the degree-4 rule (or skipped), uncertain ones
/// are split four ways until the depth limit, where the indicator is
/// sampled at the quadrature points.
template <typename Integrand, typename Indicator>
double band_recurse(const AnalyticField& f, const std::array<Point2, 3>& v,
                    const std::array<double, 3>& fv, double lo_cut, double hi_cut,
                    int depth, int max_depth, const QuadRule& q, const Integrand& integrand,
                    const Indicator& indicator) {
  const double e01 = std::hypot(v[1][0] - v[0][0], v[1][1] - v[0][1]);
  const double e12 = std::hypot(v[2][0] - v[1][0], v[2][1] - v[1][1]);
  const double e20 = std::hypot(v[0][0] - v[2][0], v[0][1] - v[2][1]);
  const double diam = std::max({e01, e12, e20});
  const double slack = f.lipschitz * diam;
  const double vmin = std::min({fv[0], fv[1], fv[2]});
  const double vmax = std::max({fv[0], fv[1], fv[2]});
  if (vmax + slack < lo_cut || vmin - slack > hi_cut) return 0.0;
  const double area =
      0.5 * std::abs((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) -
                     (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]));
  const bool certain_inside = vmin - slack >= lo_cut && vmax + slack <= hi_cut;
  if (certain_inside || depth >= max_depth) {
    double s = 0.0;
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const auto& l = q.points[k];
      const double x1 = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
      const double x2 = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
      if (certain_inside || indicator(f.value(x1, x2)))
        s += q.weights[k] * integrand(x1, x2);
    }
    return area * s;
  }
  const Point2 m01{0.5 * (v[0][0] + v[1][0]), 0.5 * (v[0][1] + v[1][1])};
  const Point2 m12{0.5 * (v[1][0] + v[2][0]), 0.5 * (v[1][1] + v[2][1])};
  const Point2 m20{0.5 * (v[2][0] + v[0][0]), 0.5 * (v[2][1] + v[0][1])};
  const double f01 = f.value(m01[0], m01[1]);
  const double f12 = f.value(m12[0], m12[1]);
  const double f20 = f.value(m20[0], m20[1]);
  double s = 0.0;
  s += band_recurse(f, {v[0], m01, m20}, {fv[0], f01, f20}, lo_cut, hi_cut, depth + 1,
                    max_depth, q, integrand, indicator);
  s += band_recurse(f, {m01, v[1], m12}, {f01, fv[1], f12}, lo_cut, hi_cut, depth + 1,
                    max_depth, q, integrand, indicator);
  s += band_recurse(f, {m20, m12, v[2]}, {f20, f12, fv[2]}, lo_cut, hi_cut, depth + 1,
                    max_depth, q, integrand, indicator);
  s += band_recurse(f, {m01, m12, m20}, {f01, f12, f20}, lo_cut, hi_cut, depth + 1,
                    max_depth, q, integrand, indicator);
  return s;
}

template <typename Integrand, typename Indicator>
double band_integral(const AnalyticField& f, double lo_cut, double hi_cut,
                     const Integrand& integrand, const Indicator& indicator,
                     const BandQuadOptions& opts) {
  const TriMesh base = uniform_unit_square(opts.base_subdivisions);
  const QuadRule q = quad_rule(4);
  double s = 0.0;
  for (int t = 0; t < base.num_triangles(); ++t) {
    const auto& tri = base.triangles[t];
    const std::array<Point2, 3> v{base.vertices[tri[0]], base.vertices[tri[1]],
                                  base.vertices[tri[2]]};
    const std::array<double, 3> fv{f.value(v[0][0], v[0][1]), f.value(v[1][0], v[1][1]),
                                   f.value(v[2][0], v[2][1])};
    s += band_recurse(f, v, fv, lo_cut, hi_cut, 0, opts.max_depth, q, integrand, indicator);
  }
  return s;
}

}  // namespace detail

/// ||V(y, r)||_{L1}: sigma0 * int over the band {0 < |y - tbar| <= r} of
/// |d y/dx1| + |d y/dx2|. Quadrature points with y exactly at tbar are
/// excluded (measure zero).
inline double band_functional(const AnalyticField& y, double tbar, double r, double sigma0,
                              const detail::BandQuadOptions& opts = {}) {
  if (r <= 0.0) throw std::invalid_argument("band_functional: r must be positive");
  if (sigma0 == 0.0) return 0.0;
  auto integrand = [&y](double x1, double x2) {
    const Point2 g = y.grad(x1, x2);
    return std::abs(g[0]) + std::abs(g[1]);
  };
  auto indicator = [tbar, r](double v) {
    const double d = std::abs(v - tbar);
    return d > 0.0 && d <= r;
  };
  return sigma0 * detail::band_integral(y, tbar - r, tbar + r, integrand, indicator, opts);
}

inline double sigma_r(const AnalyticField& y, double tbar, double r, double sigma0,
                      const detail::BandQuadOptions& opts = {}) {
  return band_functional(y, tbar, r, sigma0, opts) / r;
}

/// meas({ |y - tbar| < r }) with the same adaptive indicator quadrature.
inline double band_measure(const AnalyticField& y, double tbar, double r,
                           const detail::BandQuadOptions& opts = {}) {
  if (r <= 0.0) throw std::invalid_argument("band_measure: r must be positive");
  auto integrand = [](double, double) { return 1.0; };
  auto indicator = [tbar, r](double v) { return std::abs(v - tbar) < r; };
  return detail::band_integral(y, tbar - r, tbar + r, integrand, indicator, opts);
}

struct SigmaEstimate {
  std::vector<double> rs;
  std::vector<double> sigma_rs;
  double extrapolated = 0.0;
  bool diverging = false;
};

/// Approximates the limsup of sigma_r as r -> 0 by evaluating on a
/// decreasing r-sequence and extrapolating linearly in r from the tail.
inline SigmaEstimate estimate_sigma(const AnalyticField& y, double tbar, double sigma0,
                                    const std::vector<double>& r_list,
                                    const detail::BandQuadOptions& opts = {}) {
  if (r_list.size() < 3)
    throw std::invalid_argument("estimate_sigma: need at least 3 radii");
  for (std::size_t i = 1; i < r_list.size(); ++i)
    if (!(r_list[i] < r_list[i - 1]))
      throw std::invalid_argument("estimate_sigma: radii must be strictly decreasing");
  SigmaEstimate est;
  est.rs = r_list;
  for (double r : r_list) est.sigma_rs.push_back(sigma_r(y, tbar, r, sigma0, opts));
  const std::size_t m = est.sigma_rs.size();
  const double s1 = est.sigma_rs[m - 2], s2 = est.sigma_rs[m - 1];
  const double r1 = r_list[m - 2], r2 = r_list[m - 1];
  est.extrapolated = s2 + (s2 - s1) * r2 / (r1 - r2);
  // A tail that keeps growing as r shrinks signals Sigma = infinity.
  const double floor = std::max(1.0, std::abs(est.sigma_rs.front()));
  est.diverging = s2 > 1.5 * std::max(est.sigma_rs.front(), floor) && s2 > s1;
  return est;
}

inline std::vector<double> default_sigma_radii() {
  std::vector<double> rs;
  for (double r = 1e-1; r > 1e-3; r *= 0.5) rs.push_back(r);
  return rs;
}

/// Chord of the level set {y_h = tbar} inside one triangle.
struct LevelSegment {
  int tri = -1;
  Point2 p0{0.0, 0.0}, p1{0.0, 0.0};
  bool degenerate = false;  // level set runs along an edge (or whole triangle)

  double length() const { return std::hypot(p1[0] - p0[0], p1[1] - p0[1]); }
};

inline std::vector<LevelSegment> level_segments(const FeFunction& y, double tbar) {
  std::vector<LevelSegment> segs;
  const TriMesh& mesh = *y.mesh;
  // Edge-aligned pieces are shared by up to two triangles; keep one copy so
  // that segment lengths sum to the measure of the level set.
  std::set<std::pair<int, int>> edge_seen;
  auto push_edge = [&](int t, int va, int vb) {
    auto key = std::minmax(va, vb);
    if (!edge_seen.insert(key).second) return;
    segs.push_back({t, mesh.vertices[va], mesh.vertices[vb], true});
  };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    std::array<double, 3> s;
    int zeros = 0, pos = 0, neg = 0;
    for (int k = 0; k < 3; ++k) {
      s[k] = y.values[tri[k]] - tbar;
      if (s[k] == 0.0)
        ++zeros;
      else if (s[k] > 0.0)
        ++pos;
      else
        ++neg;
    }
    const auto vertex = [&](int k) { return mesh.vertices[tri[k]]; };
    if (zeros == 3) {
      for (int k = 0; k < 3; ++k) push_edge(t, tri[k], tri[(k + 1) % 3]);
      continue;
    }
    if (zeros == 2) {
      int a = -1, b = -1;
      for (int k = 0; k < 3; ++k)
        if (s[k] == 0.0) (a < 0 ? a : b) = k;
      push_edge(t, tri[a], tri[b]);
      continue;
    }
    if (pos == 0 || neg == 0) continue;  // no crossing (a lone zero vertex is a point)
    std::vector<Point2> pts;
    if (zeros == 1) {
      for (int k = 0; k < 3; ++k)
        if (s[k] == 0.0) pts.push_back(vertex(k));
    }
    for (int k = 0; k < 3; ++k) {
      const int k2 = (k + 1) % 3;
      if (s[k] * s[k2] < 0.0) {
        const double w = s[k] / (s[k] - s[k2]);
        const Point2 a = vertex(k), b = vertex(k2);
        pts.push_back({a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])});
      }
    }
    if (pts.size() == 2) segs.push_back({t, pts[0], pts[1], false});
  }
  return segs;
}

/// The level-set line integral of the second-order nonsmooth curvature:
///   1/2 (a0'(tbar) - a1'(tbar)) int_{y = tbar, |grad y| > 0}
///        z^2 (grad y . grad phi) / |grad y| dH^1.
/// Gradients are per-triangle constants; a 2-point Gauss rule handles the
/// quadratic z^2 factor along each chord. Edge-aligned (degenerate)
/// segments are skipped.
inline double q2_line_integral(const FeFunction& y, const FeFunction& phi,
                               const FeFunction& z, const PC1Coeff& coeff) {
  const TriMesh& mesh = *y.mesh;
  const auto segs = level_segments(y, coeff.kink());
  const double factor = 0.5 * coeff.slope_gap();
  if (factor == 0.0) return 0.0;
  double total = 0.0;
  auto z_at = [&](int t, const Point2& p) {
    const auto& tri = mesh.triangles[t];
    const Point2& a = mesh.vertices[tri[0]];
    const Point2 gz = z.gradient_on(t);
    return z.values[tri[0]] + gz[0] * (p[0] - a[0]) + gz[1] * (p[1] - a[1]);
  };
  const double gauss = 1.0 / std::sqrt(3.0);
  for (const auto& seg : segs) {
    if (seg.degenerate) continue;
    const Point2 gy = y.gradient_on(seg.tri);
    const double gnorm = std::hypot(gy[0], gy[1]);
    if (gnorm == 0.0) continue;
    const Point2 gphi = phi.gradient_on(seg.tri);
    const double geom = (gy[0] * gphi[0] + gy[1] * gphi[1]) / gnorm;
    const double len = seg.length();
    if (len == 0.0) continue;
    const Point2 mid{0.5 * (seg.p0[0] + seg.p1[0]), 0.5 * (seg.p0[1] + seg.p1[1])};
    const Point2 half{0.5 * (seg.p1[0] - seg.p0[0]), 0.5 * (seg.p1[1] - seg.p0[1])};
    double zsq = 0.0;
    for (double s : {-gauss, gauss}) {
      const Point2 p{mid[0] + s * half[0], mid[1] + s * half[1]};
      const double zv = z_at(seg.tri, p);
      zsq += 0.5 * zv * zv;
    }
    total += factor * geom * len * zsq;
  }
  return total;
}

struct CurvatureBreakdown {
  double q_smooth = 0.0;
  double q_first = 0.0;
  double q_second = 0.0;
  double total = 0.0;
  FeFunction z;
};

/// Total curvature Q = Q_s + Q_1 + Q_2 in direction v at (y, phi), with
/// z_v obtained from the linearized state equation.
inline CurvatureBreakdown q_total(const OcpSpec& spec, const TriMesh& mesh,
                                  const FeFunction& y, const FeFunction& phi,
                                  const ScalarField& v) {
  CurvatureBreakdown out;
  out.z = solve_linearized(mesh, spec.coeff, spec.b_field, y, v, 2);
  const QuadRule q = quad_rule(4);
  const double tbar = spec.coeff.kink();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.tri_area(t);
    const Point2 gy = y.gradient_on(t);
    const Point2 gphi = phi.gradient_on(t);
    const Point2 gz = out.z.gradient_on(t);
    const double gy_gphi = gy[0] * gphi[0] + gy[1] * gphi[1];
    const double gz_gphi = gz[0] * gphi[0] + gz[1] * gphi[1];
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const Point2 x = mesh.bary_point(t, q.points[k]);
      const double wq = area * q.weights[k];
      const double yv = y.at_bary(t, q.points[k]);
      const double zv = out.z.at_bary(t, q.points[k]);
      const double vv = v(x[0], x[1]);
      double qs = 0.5 * spec.cost.dyy(x[0], x[1], yv) * zv * zv + 0.5 * spec.nu * vv * vv;
      if (yv != tbar) qs -= 0.5 * spec.coeff.curvature_at(yv) * zv * zv * gy_gphi;
      out.q_smooth += wq * qs;
      out.q_first -= wq * spec.coeff.eval_dir(yv, zv) * gz_gphi;
    }
  }
  out.q_second = q2_line_integral(y, phi, out.z, spec.coeff);
  out.total = out.q_smooth + out.q_first + out.q_second;
  return out;
}

}  // namespace qlocp

#endif
