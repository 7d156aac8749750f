#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "os2/pod.hpp"

using namespace os2;

namespace {

GeomConfig coarse_geom() {
  GeomConfig g;
  g.int_nx = 6;
  g.int_ny = 8;
  g.ext_h = 1.0 / 12.0;
  g.grade_levels = 1;
  return g;
}

const ComponentLibrary& library() {
  static ComponentLibrary lib = ComponentLibrary::build(coarse_geom());
  return lib;
}

std::vector<Eigen::VectorXd> random_fields(const Archetype& arch, int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gn;
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(arch.space.n_dofs());
    for (int i = 0; i < arch.space.n_dofs(); ++i)
      if (!arch.space.constrained[i]) u[i] = gn(rng);
    out.push_back(u);
  }
  return out;
}

}  // namespace

TEST_CASE("bubble/port split is exact and bubble parts vanish on the port") {
  const Archetype& arch = library().internal;
  for (const Eigen::VectorXd& u : random_fields(arch, 3, 11)) {
    Eigen::VectorXd b, p;
    arch.split(u, b, p);
    REQUIRE(((b + p) - u).lpNorm<Eigen::Infinity>() < 1e-11 * u.lpNorm<Eigen::Infinity>());
    for (int dof : arch.port_dofs) REQUIRE(std::abs(b[dof]) < 1e-12);
  }
}

TEST_CASE("a bubble-only snapshot lands entirely in the bubble dataset") {
  const Archetype& arch = library().internal;
  std::mt19937 rng(3);
  std::normal_distribution<double> gn;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(arch.space.n_dofs());
  for (int dof : arch.bubble_dofs) u[dof] = gn(rng);
  Eigen::VectorXd b, p;
  arch.split(u, b, p);
  REQUIRE(p.norm() < 1e-12 * u.norm());
  REQUIRE((b - u).norm() < 1e-12 * u.norm());
}

TEST_CASE("POD of identical snapshots keeps a single normalized mode") {
  const Archetype& arch = library().internal;
  const Eigen::VectorXd u = random_fields(arch, 1, 5)[0];
  const std::vector<Eigen::VectorXd> data{u, u, u, u};
  const PodResult r = pod(data, arch.ip, 3);
  REQUIRE(r.truncated_to_rank);
  REQUIRE(r.modes.cols() == 1);
  REQUIRE(arch.ip.norm(r.modes.col(0)) == Catch::Approx(1.0).epsilon(1e-10));
  const double align = std::abs(arch.ip.dot(r.modes.col(0), u)) / arch.ip.norm(u);
  REQUIRE(align == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("POD of two orthonormal fields spans them with equal singular values") {
  const Archetype& arch = library().internal;
  auto data = random_fields(arch, 2, 23);
  // orthonormalize in the component inner product
  data[0] /= arch.ip.norm(data[0]);
  data[1] -= arch.ip.dot(data[0], data[1]) * data[0];
  data[1] /= arch.ip.norm(data[1]);
  const PodResult r = pod(data, arch.ip, 2);
  REQUIRE(r.modes.cols() == 2);
  REQUIRE(r.singular_values[0] == Catch::Approx(r.singular_values[1]).epsilon(1e-10));
  // the span is preserved: projecting the data onto the modes is lossless
  for (const auto& u : data) {
    Eigen::VectorXd c = r.modes.transpose() * (arch.ip.M * u);
    REQUIRE((r.modes * c - u).norm() < 1e-10);
  }
}

TEST_CASE("POD modes are orthonormal with nonincreasing singular values") {
  const Archetype& arch = library().external;
  auto data = random_fields(arch, 8, 37);
  const PodResult r = pod(data, arch.ip, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = i; j < 5; ++j) {
      const double d = arch.ip.dot(r.modes.col(i), r.modes.col(j));
      REQUIRE(d == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-10));
    }
  for (int i = 1; i < 5; ++i) REQUIRE(r.singular_values[i] <= r.singular_values[i - 1]);
}

TEST_CASE("POD subspaces beat random subspaces at reconstruction") {
  const Archetype& arch = library().internal;
  std::mt19937 rng(91);
  for (int trial = 0; trial < 5; ++trial) {
    auto data = random_fields(arch, 10, 100 + trial);
    const int k = 3;
    const PodResult r = pod(data, arch.ip, k);
    auto proj_err = [&](const Eigen::MatrixXd& basis) {
      double acc = 0;
      for (const auto& u : data) {
        Eigen::VectorXd c = basis.transpose() * (arch.ip.M * u);
        acc += std::pow(arch.ip.norm(u - basis * c), 2);
      }
      return acc;
    };
    // orthonormalized random snapshot combinations as competitor
    std::normal_distribution<double> gn;
    Eigen::MatrixXd R(static_cast<int>(data.size()), k);
    for (Eigen::Index i = 0; i < R.rows(); ++i)
      for (Eigen::Index j = 0; j < R.cols(); ++j) R(i, j) = gn(rng);
    Eigen::MatrixXd cand(data[0].size(), k);
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(data[0].size());
      for (std::size_t s = 0; s < data.size(); ++s) v += R(static_cast<int>(s), j) * data[s];
      for (int c = 0; c < j; ++c) v -= arch.ip.dot(cand.col(c), v) * cand.col(c);
      cand.col(j) = v / arch.ip.norm(v);
    }
    REQUIRE(proj_err(r.modes) <= proj_err(cand) + 1e-12);
  }
}

TEST_CASE("projected coefficients reconstruct snapshots in the basis span") {
  ComponentLibrary lib = ComponentLibrary::build(coarse_geom());
  std::vector<GlobalParams> train{{26.0, 11.0, 17.0, 0.45, 2}, {29.0, 19.0, 12.0, 0.8, 2},
                                  {25.5, 14.0, 14.0, 0.6, 3}};
  NewtonConfig cfg;
  SnapshotSet set = harvest(lib, train, cfg);
  REQUIRE(set.count(0) == 2 + 2 + 3);
  REQUIRE(set.count(1) == 3);

  const int n = 3, m = 3;
  ProjectedCoefficients pc = train_bases(lib, set, n, m);

  for (int a = 0; a < 2; ++a) {
    const Archetype& arch = lib.arch(a);
    REQUIRE(arch.Zb.cols() == n);
    REQUIRE(arch.Wp.cols() == m);
    // port modes remain discretely harmonic
    for (int c = 0; c < m; ++c) {
      const Eigen::VectorXd Mv = arch.ip.M * arch.Wp.col(c);
      double worst = 0;
      for (int bdof : arch.bubble_dofs) worst = std::max(worst, std::abs(Mv[bdof]));
      REQUIRE(worst < 1e-10);
    }
    // Pythagoras for every snapshot: |u|^2 = |proj|^2 + |residual|^2
    for (int j = 0; j < set.count(a); ++j) {
      const Eigen::VectorXd u = set.bubble[a][j] + set.port[a][j];
      const Eigen::VectorXd rec =
          arch.Zb * pc.alpha[a].col(j) + arch.Wp * pc.beta[a].col(j);
      const double u2 = std::pow(arch.ip.norm(u), 2);
      const double p2 = std::pow(arch.ip.norm(rec), 2);
      const double r2 = std::pow(arch.ip.norm(u - rec), 2);
      REQUIRE(u2 == Catch::Approx(p2 + r2).epsilon(1e-10));
    }
  }

  // a snapshot already in the span is reconstructed exactly; zero maps to zero
  const Archetype& arch = lib.internal;
  const Eigen::VectorXd in_span = arch.Zb.col(0) * 1.7 - arch.Wp.col(1) * 0.4;
  Eigen::VectorXd b, p;
  arch.split(in_span, b, p);
  const Eigen::VectorXd alpha = arch.Zb.transpose() * (arch.ip.M * b);
  const Eigen::VectorXd beta = arch.Wp.transpose() * (arch.ip.M * p);
  const Eigen::VectorXd rec = arch.Zb * alpha + arch.Wp * beta;
  REQUIRE((rec - in_span).norm() < 1e-10);
  REQUIRE((arch.Zb.transpose() * (arch.ip.M * Eigen::VectorXd::Zero(arch.space.n_dofs())))
              .norm() == 0.0);
}

TEST_CASE("dropping trailing modes increases in-sample projection error") {
  const Archetype& arch = library().internal;
  auto data = random_fields(arch, 6, 55);
  const PodResult r = pod(data, arch.ip, 5);
  double prev = -1;
  for (int k = 5; k >= 1; --k) {
    const Eigen::MatrixXd basis = r.modes.leftCols(k);
    double acc = 0;
    for (const auto& u : data) {
      Eigen::VectorXd c = basis.transpose() * (arch.ip.M * u);
      acc += std::pow(arch.ip.norm(u - basis * c), 2);
    }
    REQUIRE(acc >= prev - 1e-12);
    prev = acc;
  }
}
