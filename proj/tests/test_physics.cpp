#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "os2/neohookean.hpp"

using namespace os2;

namespace {

std::vector<double> uniform_knots(double a, double b, int n) {
  std::vector<double> k(n + 1);
  for (int i = 0; i <= n; ++i) k[i] = a + (b - a) * i / n;
  return k;
}

// Unit square with bottom split into a clamped part and a traction region,
// mimicking the internal component's boundary layout.
struct Fixture {
  Mesh mesh;
  FeSpace space;
  ComponentModel model;

  explicit Fixture(double s = 0.5, int n = 3) {
    mesh = Mesh::tensor2d(uniform_knots(0, 1, n), uniform_knots(0, 1, n), 2);
    std::vector<Facet> dir, neu, top;
    for (int cx = 0; cx < mesh.nx(); ++cx) {
      const Facet bottom{mesh.cell_elem[cx], 0};
      const Facet upper{mesh.cell_elem[(mesh.ny() - 1) * mesh.nx() + cx], 2};
      if (cx == mesh.nx() / 2)
        neu.push_back(bottom);
      else
        dir.push_back(bottom);
      top.push_back(upper);
    }
    mesh.tags["dir"] = dir;
    mesh.tags["neumann-r"] = neu;
    mesh.tags["neumann-top"] = top;
    space = FeSpace(mesh, 2);
    space.constrain("dir");
    model.mesh = &mesh;
    model.space = &space;
    model.mat.assign(mesh.n_elems(), Material::plane_stress(25.0, 0.3));
    model.load.s = s;
    model.load.g_scale = 1.0;
  }
};

Eigen::VectorXd random_field(int n, unsigned seed, double scale) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gn;
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = scale * gn(rng);
  return u;
}

}  // namespace

TEST_CASE("first Piola stress vanishes at the identity") {
  const Material m = Material::plane_stress(25.0, 0.3);
  const Eigen::Matrix2d P = first_piola(Eigen::Matrix2d::Identity(), m);
  REQUIRE(P.norm() == 0.0);
}

TEST_CASE("plane-stress Lame constants") {
  const Material m = Material::plane_stress(25.0, 0.3);
  REQUIRE(m.lambda1 == Catch::Approx(8.241758241758242).epsilon(1e-15));
  REQUIRE(m.lambda2 == Catch::Approx(9.615384615384615).epsilon(1e-15));
}

TEST_CASE("stress tangent matches central finite differences") {
  const Material m = Material::plane_stress(25.0, 0.3);
  std::mt19937 rng(41);
  std::normal_distribution<double> gn;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Matrix2d F;
    do {
      F = Eigen::Matrix2d::Identity();
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) F(i, j) += 0.2 * gn(rng);
    } while (F.determinant() <= 0.1);
    Eigen::Matrix2d dF;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) dF(i, j) = gn(rng);
    dF /= dF.norm();
    const double eps = 1e-6;
    const Eigen::Matrix2d fd =
        (first_piola(F + eps * dF, m) - first_piola(F - eps * dF, m)) / (2 * eps);
    const Eigen::Matrix2d an = piola_tangent_apply(F, dF, m);
    REQUIRE((an - fd).norm() < 1e-6 * std::max(1.0, an.norm()));
  }
}

TEST_CASE("inverted deformation state is rejected") {
  const Material m = Material::plane_stress(25.0, 0.3);
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = -0.5;
  REQUIRE_THROWS_AS(first_piola(F, m), InvertedElementError);
}

TEST_CASE("zero loads and zero displacement give a zero residual") {
  Fixture fx(0.0);
  fx.model.load.g_scale = 0.0;
  const Eigen::VectorXd R =
      assemble_residual(fx.model, Eigen::VectorXd::Zero(fx.space.n_dofs()));
  REQUIRE(R.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("all-ones weights reproduce the unweighted residual entrywise") {
  Fixture fx(0.7);
  const Eigen::VectorXd u = random_field(fx.space.n_dofs(), 7, 0.01);
  const Eigen::VectorXd a = assemble_residual(fx.model, u);
  const Eigen::VectorXd b =
      assemble_residual(fx.model, u, Eigen::VectorXd::Ones(fx.mesh.n_elems()));
  REQUIRE((a - b).lpNorm<Eigen::Infinity>() < 1e-14 * a.lpNorm<Eigen::Infinity>());
}

TEST_CASE("traction resultant matches the loaded region measure") {
  Fixture fx(0.8);
  fx.model.load.g_scale = 0.0;
  const Eigen::VectorXd R =
      assemble_residual(fx.model, Eigen::VectorXd::Zero(fx.space.n_dofs()));
  double sum_y = 0;
  for (int i = 0; i < fx.mesh.n_nodes(); ++i) sum_y += R[2 * i + 1];
  // R = -int t.phi with t = (0,-s) over a region of width 1/3
  REQUIRE(sum_y == Catch::Approx(0.8 / 3.0).epsilon(1e-12));
}

TEST_CASE("residual Jacobian matches central finite differences") {
  Fixture fx(0.5);
  const int N = fx.space.n_dofs();
  const Eigen::VectorXd u = random_field(N, 13, 0.02);
  const Eigen::SparseMatrix<double> J = assemble_jacobian(fx.model, u);
  std::mt19937 rng(29);
  std::normal_distribution<double> gn;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd du(N);
    for (int i = 0; i < N; ++i) du[i] = gn(rng);
    du.normalize();
    const double eps = 1e-6;
    const Eigen::VectorXd fd =
        (assemble_residual(fx.model, u + eps * du) - assemble_residual(fx.model, u - eps * du)) /
        (2 * eps);
    const Eigen::VectorXd an = J * du;
    REQUIRE((an - fd).norm() < 1e-5 * an.norm());
  }
}

TEST_CASE("tangent at zero displacement is the small-strain stiffness") {
  Fixture fx(0.0);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(fx.space.n_dofs());
  const Eigen::SparseMatrix<double> Knl = assemble_jacobian(fx.model, u0);
  ComponentModel lin = fx.model;
  lin.kind = PdeKind::LinearElastic;
  const Eigen::SparseMatrix<double> Kl = assemble_jacobian(lin, u0);
  const Eigen::VectorXd v = random_field(fx.space.n_dofs(), 3, 1.0);
  REQUIRE((Knl * v - Kl * v).norm() < 1e-8 * (Kl * v).norm());
}

TEST_CASE("elastic tangent is symmetric at finite strain") {
  Fixture fx(0.9);
  const Eigen::VectorXd u = random_field(fx.space.n_dofs(), 31, 0.02);
  const Eigen::SparseMatrix<double> J = assemble_jacobian(fx.model, u);
  const Eigen::SparseMatrix<double> D =
      Eigen::SparseMatrix<double>(J.transpose()) - J;
  REQUIRE(D.coeffs().cwiseAbs().maxCoeff() <
          1e-10 * J.coeffs().cwiseAbs().maxCoeff());
}

TEST_CASE("negative weights are rejected") {
  Fixture fx;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(fx.mesh.n_elems());
  w[2] = -0.5;
  REQUIRE_THROWS_WITH(
      assemble_residual(fx.model, Eigen::VectorXd::Zero(fx.space.n_dofs()), w),
      Catch::Matchers::ContainsSubstring("negative"));
}

TEST_CASE("inverted elements raise an error naming the element") {
  Fixture fx;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(fx.space.n_dofs());
  // collapse horizontally: u_x = -2x folds every element over itself
  for (int i = 0; i < fx.mesh.n_nodes(); ++i) u[2 * i] = -2.0 * fx.mesh.nodes(i, 0);
  REQUIRE_THROWS_AS(assemble_residual(fx.model, u), InvertedElementError);
}

TEST_CASE("1d kernels: the P2 interpolant of x^2 solves u''=2") {
  Mesh mesh = Mesh::line1d(uniform_knots(-1, 1, 7), 2);
  FeSpace space(mesh, 1);
  ComponentModel model;
  model.mesh = &mesh;
  model.space = &space;
  model.kind = PdeKind::Poisson1d;
  model.source = 2.0;  // residual entries int u' phi' + int 2 phi
  Eigen::VectorXd u(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) u[i] = mesh.nodes(i, 0) * mesh.nodes(i, 0);
  const Eigen::VectorXd R = assemble_residual(model, u);
  // interior entries vanish (boundary rows carry the flux)
  for (int i = 1; i + 1 < mesh.n_nodes(); ++i) REQUIRE(std::abs(R[i]) < 1e-13);
}

TEST_CASE("reduced assembly agrees with full assembly contracted by bases") {
  Fixture fx(0.4);
  const int N = fx.space.n_dofs();
  const int n = 5, m = 3;
  Eigen::MatrixXd Z(N, n), W(N, m);
  std::mt19937 rng(77);
  std::normal_distribution<double> gn;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < n; ++j) Z(i, j) = gn(rng);
    for (int j = 0; j < m; ++j) W(i, j) = gn(rng);
  }
  const Eigen::VectorXd u = random_field(N, 15, 0.02);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(fx.mesh.n_elems());
  w[0] = 0.0;
  w[3] = 2.5;

  Eigen::VectorXd rhat;
  Eigen::MatrixXd Jaa, Jab, G;
  assemble_reduced(fx.model, u, w, Z, W, &rhat, &Jaa, &Jab, &G);

  // weighted assembly equals the weight-scaled full residual contracted by Z
  const Eigen::VectorXd Rw = assemble_residual(fx.model, u, w);
  REQUIRE((rhat - Z.transpose() * Rw).norm() < 1e-12 * std::max(1.0, rhat.norm()));
  const Eigen::SparseMatrix<double> K = assemble_jacobian(fx.model, u, w);
  REQUIRE((Jaa - Z.transpose() * K * Z).norm() < 1e-12 * Jaa.norm());
  REQUIRE((Jab - Z.transpose() * K * W).norm() < 1e-12 * Jab.norm());
  // constraint columns sum (with weights) back to the weighted reduced residual
  REQUIRE((G * w - rhat).norm() < 1e-12 * std::max(1.0, rhat.norm()));
}
