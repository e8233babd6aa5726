#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qlocp/assembly.hpp"

using namespace qlocp;

namespace {

// Independent dense assembly of int c(x) grad phi_j . grad phi_i plus the
// optional coupling int s(x) phi_j grad y . grad phi_i, with gradients taken
// from the rotated-edge formula rather than the library routine.
std::vector<std::vector<double>> dense_operator(
    const TriMesh& mesh, const std::function<double(double, double, double)>& c,
    const std::function<double(double)>& slope, const FeFunction& y, int degree) {
  const QuadRule q = quad_rule(degree);
  const int n = mesh.num_vertices();
  std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& p0 = mesh.vertices[tri[0]];
    const auto& p1 = mesh.vertices[tri[1]];
    const auto& p2 = mesh.vertices[tri[2]];
    const double twoA = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    const double area = 0.5 * twoA;
    // grad lambda_i = perp(p_k - p_j) / (2 A), (i, j, k) cyclic.
    std::array<Point2, 3> g;
    const std::array<const std::array<double, 2>*, 3> p{&p0, &p1, &p2};
    for (int i = 0; i < 3; ++i) {
      const auto& pj = *p[(i + 1) % 3];
      const auto& pk = *p[(i + 2) % 3];
      g[i] = {(pj[1] - pk[1]) / twoA, (pk[0] - pj[0]) / twoA};
    }
    Point2 gy{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      gy[0] += y.values[tri[i]] * g[i][0];
      gy[1] += y.values[tri[i]] * g[i][1];
    }
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const auto& lam = q.points[k];
      const double x1 = lam[0] * p0[0] + lam[1] * p1[0] + lam[2] * p2[0];
      const double x2 = lam[0] * p0[1] + lam[1] * p1[1] + lam[2] * p2[1];
      const double yv = lam[0] * y.values[tri[0]] + lam[1] * y.values[tri[1]] +
                        lam[2] * y.values[tri[2]];
      const double cv = c(x1, x2, yv);
      const double sv = slope(yv);
      for (int i = 0; i < 3; ++i) {
        if (mesh.boundary_mask[tri[i]]) continue;
        for (int j = 0; j < 3; ++j) {
          if (mesh.boundary_mask[tri[j]]) continue;
          double v = cv * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
          v += sv * lam[j] * (gy[0] * g[i][0] + gy[1] * g[i][1]);
          A[tri[i]][tri[j]] += area * q.weights[k] * v;
        }
      }
    }
  }
  for (int v = 0; v < n; ++v)
    if (mesh.boundary_mask[v]) A[v][v] = 1.0;
  return A;
}

const ScalarField one = [](double, double) { return 1.0; };

}  // namespace

TEST_CASE("Laplace stiffness reproduces the five point stencil") {
  const TriMesh mesh = uniform_unit_square(2);
  FeFunction y(mesh);
  const SparseMatrix K = stiffness_weighted(mesh, nullptr, one, y);
  const auto dense = K.to_dense();
  // Single interior vertex at index 4; all its neighbours are boundary.
  CHECK(dense[4][4] == Catch::Approx(4.0).epsilon(1e-13));
  for (int j = 0; j < 9; ++j)
    if (j != 4) CHECK(dense[4][j] == 0.0);

  const TriMesh m4 = uniform_unit_square(4);
  const SparseMatrix K4 = stiffness_weighted(m4, nullptr, one, FeFunction(m4));
  const auto d4 = K4.to_dense();
  const int c = 2 * 5 + 2;  // vertex (2,2) in row-major order
  CHECK(d4[c][c] == Catch::Approx(4.0).epsilon(1e-13));
  CHECK(d4[c][c - 1] == Catch::Approx(-1.0).epsilon(1e-13));
  CHECK(d4[c][c + 1] == Catch::Approx(-1.0).epsilon(1e-13));
  CHECK(d4[c][c - 5] == Catch::Approx(-1.0).epsilon(1e-13));
  CHECK(d4[c][c + 5] == Catch::Approx(-1.0).epsilon(1e-13));
  CHECK(d4[c][c - 4] == Catch::Approx(0.0).margin(1e-14));
  CHECK(d4[c][c + 4] == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("null coefficient pointer matches an identically zero coefficient") {
  const TriMesh mesh = uniform_unit_square(3);
  const FeFunction y = interpolate(mesh, [](double a, double b) { return a * b; });
  const PC1Coeff zero(CoeffBranch::constant(0.0), CoeffBranch::constant(0.0), 0.5);
  const SparseMatrix A = stiffness_weighted(mesh, nullptr, one, y);
  const SparseMatrix B = stiffness_weighted(mesh, &zero, one, y);
  CHECK(A.triples() == B.triples());
}

TEST_CASE("constant weight scales the interior stiffness entries") {
  const TriMesh mesh = uniform_unit_square(3);
  const FeFunction y(mesh);
  const auto A1 = stiffness_weighted(mesh, nullptr, one, y).to_dense();
  const auto A2 =
      stiffness_weighted(mesh, nullptr, [](double, double) { return 2.0; }, y).to_dense();
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (mesh.boundary_mask[i]) continue;
    for (int j = 0; j < mesh.num_vertices(); ++j) {
      if (mesh.boundary_mask[j]) continue;
      CHECK(A2[i][j] == Catch::Approx(2.0 * A1[i][j]).margin(1e-14));
    }
  }
}

TEST_CASE("mass matrix entries and total sum") {
  const TriMesh mesh = uniform_unit_square(1);
  const auto M = mass(mesh).to_dense();
  // Vertex 0 = (0,0) lies in both triangles: int phi_0^2 = 2 * (1/2)/6.
  CHECK(M[0][0] == Catch::Approx(1.0 / 6.0).epsilon(1e-13));
  CHECK(M[0][1] == Catch::Approx(1.0 / 24.0).epsilon(1e-13));
  CHECK(M[1][0] == M[0][1]);

  for (int m : {1, 2, 5}) {
    const TriMesh msh = uniform_unit_square(m);
    double sum = 0.0;
    for (const auto& [i, j, v] : mass(msh).triples()) {
      (void)i;
      (void)j;
      sum += v;
    }
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("mass matrix integrates products of nodal interpolants") {
  // For u, v in the P1 space, u^T M v = int u v. Take u = v = interpolant of 1.
  const TriMesh mesh = uniform_unit_square(4);
  const SparseMatrix M = mass(mesh);
  const std::vector<double> ones(mesh.num_vertices(), 1.0);
  const auto Mv = M.matvec(ones);
  double val = 0.0;
  for (int i = 0; i < mesh.num_vertices(); ++i) val += ones[i] * Mv[i];
  CHECK(val == Catch::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("mass_weighted with unit weight matches mass on interior entries") {
  const TriMesh mesh = uniform_unit_square(3);
  const auto Mw = mass_weighted(mesh, one).to_dense();
  const auto M = mass(mesh).to_dense();
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (mesh.boundary_mask[i]) continue;
    for (int j = 0; j < mesh.num_vertices(); ++j) {
      if (mesh.boundary_mask[j]) continue;
      CHECK(Mw[i][j] == Catch::Approx(M[i][j]).margin(1e-15));
    }
  }
}

TEST_CASE("load vector values for constant and affine data") {
  const TriMesh mesh = uniform_unit_square(2);
  const auto b = load(mesh, one);
  CHECK(b[4] == Catch::Approx(0.25).epsilon(1e-13));  // interior hat integrates to area/3
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.boundary_mask[v]) CHECK(b[v] == 0.0);

  // For f = x1 the interior hat at (1/2, 1/2) is symmetric about x1 = 1/2.
  const auto bx = load(mesh, [](double x1, double) { return x1; });
  CHECK(bx[4] == Catch::Approx(0.125).epsilon(1e-13));
  const auto bx4 = load(mesh, [](double x1, double) { return x1; }, 4);
  CHECK(bx4[4] == Catch::Approx(0.125).epsilon(1e-13));
}

TEST_CASE("stiffness and mass matrices are symmetric") {
  const TriMesh mesh = uniform_unit_square(4);
  const FeFunction y =
      interpolate(mesh, [](double a, double b) { return std::sin(a) * b; });
  const PC1Coeff coeff = PC1Coeff::max_type(0.3);
  const SparseMatrix K = stiffness_weighted(mesh, &coeff, one, y);
  CHECK(K.transpose().triples() == K.triples());
  const SparseMatrix M = mass(mesh);
  CHECK(M.transpose().triples() == M.triples());
}

TEST_CASE("weighted stiffness is positive definite on interior vectors") {
  const TriMesh mesh = uniform_unit_square(5);
  const FeFunction y = interpolate(mesh, [](double a, double b) { return a + b; });
  const PC1Coeff coeff = PC1Coeff::max_type(0.5);
  const SparseMatrix K = stiffness_weighted(mesh, &coeff, one, y);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(mesh.num_vertices(), 0.0);
    bool nonzero = false;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (mesh.boundary_mask[v]) continue;
      x[v] = val(rng);
      nonzero = nonzero || x[v] != 0.0;
    }
    REQUIRE(nonzero);
    const auto Kx = K.matvec(x);
    double quad_form = 0.0;
    for (int v = 0; v < mesh.num_vertices(); ++v) quad_form += x[v] * Kx[v];
    CHECK(quad_form > 0.0);
  }
}

TEST_CASE("weighted stiffness matches an independent dense assembly") {
  const TriMesh mesh = uniform_unit_square(4);
  const PC1Coeff coeff = PC1Coeff::max_type(0.4);
  const ScalarField b_field = [](double a, double b) { return 1.0 + 0.5 * a + 0.25 * b * b; };
  const FeFunction y =
      interpolate(mesh, [](double a, double b) { return a * (1.0 - a) * std::exp(b); });
  const auto A = stiffness_weighted(mesh, &coeff, b_field, y).to_dense();
  const auto ref = dense_operator(
      mesh,
      [&](double x1, double x2, double yv) { return b_field(x1, x2) + coeff.eval(yv); },
      [](double) { return 0.0; }, y, 2);
  for (int i = 0; i < mesh.num_vertices(); ++i)
    for (int j = 0; j < mesh.num_vertices(); ++j)
      CHECK(A[i][j] == Catch::Approx(ref[i][j]).margin(1e-12));
}

TEST_CASE("linearized operator matches the dense oracle including the coupling block") {
  const TriMesh mesh = uniform_unit_square(4);
  const PC1Coeff coeff = PC1Coeff::max_type(0.4);
  const FeFunction y =
      interpolate(mesh, [](double a, double b) { return 2.0 * a * b; });
  const auto D = dh_operator(mesh, coeff, one, y).to_dense();
  const auto ref = dense_operator(
      mesh, [&](double, double, double yv) { return 1.0 + coeff.eval(yv); },
      [&](double yv) { return coeff.slope_at(yv); }, y, 2);
  for (int i = 0; i < mesh.num_vertices(); ++i)
    for (int j = 0; j < mesh.num_vertices(); ++j)
      CHECK(D[i][j] == Catch::Approx(ref[i][j]).margin(1e-12));
}

TEST_CASE("linearized operator reduces to the stiffness where the slope vanishes") {
  const TriMesh mesh = uniform_unit_square(3);
  const PC1Coeff coeff = PC1Coeff::max_type(10.0);  // y stays on the flat branch
  const FeFunction y = interpolate(mesh, [](double a, double b) { return a + b; });
  const SparseMatrix D = dh_operator(mesh, coeff, one, y);
  const SparseMatrix K = stiffness_weighted(mesh, &coeff, one, y);
  CHECK(D.triples() == K.triples());
}

TEST_CASE("FeFunction evaluation, gradients, and boundary membership") {
  const TriMesh mesh = uniform_unit_square(2);
  const FeFunction f =
      interpolate(mesh, [](double a, double b) { return 3.0 * a - 2.0 * b + 1.0; });
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Point2 g = f.gradient_on(t);
    CHECK(g[0] == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(g[1] == Catch::Approx(-2.0).epsilon(1e-12));
    const std::array<double, 3> center{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    const Point2 x = mesh.bary_point(t, center);
    CHECK(f.at_bary(t, center) ==
          Catch::Approx(3.0 * x[0] - 2.0 * x[1] + 1.0).epsilon(1e-12));
  }
  CHECK_FALSE(f.in_vh());
  FeFunction z(mesh);
  z.values[4] = 2.0;
  CHECK(z.in_vh());
  CHECK_THROWS_AS(FeFunction(mesh, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("L2 projection approximates a smooth field at second order") {
  const ScalarField f = [](double a, double b) {
    return std::sin(M_PI * a) * std::sin(M_PI * b);
  };
  double prev = 0.0;
  for (int step = 0; step < 2; ++step) {
    const int m = step == 0 ? 8 : 16;
    const TriMesh mesh = uniform_unit_square(m);
    const FeFunction p = l2_project(mesh, f);
    CHECK(p.in_vh());
    double err = 0.0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (mesh.boundary_mask[v]) continue;
      err = std::max(err,
                     std::abs(p.values[v] - f(mesh.vertices[v][0], mesh.vertices[v][1])));
    }
    if (step == 1) CHECK(err < 0.3 * prev);  // roughly O(h^2)
    prev = err;
  }
}
