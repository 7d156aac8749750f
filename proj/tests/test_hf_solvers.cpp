#include <catch2/catch_amalgamated.hpp>

#include "os2/hf_solvers.hpp"

using namespace os2;

namespace {

GeomConfig test_geom() {
  GeomConfig g;
  g.int_nx = 8;
  g.int_ny = 12;
  g.ext_h = 1.0 / 18.0;
  return g;
}

// fine enough that discretization differences near the traction corners
// drop below the comparison threshold
GeomConfig fine_geom() {
  GeomConfig g;
  g.int_nx = 16;
  g.int_ny = 24;
  g.ext_h = 1.0 / 40.0;
  return g;
}

const ComponentLibrary& library() {
  static ComponentLibrary lib = ComponentLibrary::build(test_geom());
  return lib;
}

}  // namespace

TEST_CASE("zero loads give the zero solution without Newton iterations") {
  GlobalParams p{27.0, 12.0, 18.0, 0.0, 2};
  MonolithicProblem mp = build_monolithic(test_geom(), p, 1.0 / 8.0);
  mp.load.g_scale = 0.0;
  Eigen::VectorXd u;
  const NewtonReport rep = solve_monolithic(mp, u, {});
  REQUIRE(rep.iterations == 0);
  REQUIRE(u.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("small loads approach the linear-elastic solution at second order") {
  GlobalParams p{27.0, 12.0, 18.0, 0.6, 2};
  MonolithicProblem mp = build_monolithic(test_geom(), p, 1.0 / 12.0);

  // linearized oracle: one exact Newton step on the small-strain kernel
  MonolithicProblem lin = mp;
  Eigen::VectorXd u_lin;
  {
    ComponentModel model = lin.model();
    model.kind = PdeKind::LinearElastic;
    u_lin = Eigen::VectorXd::Zero(lin.space.n_dofs());
    Eigen::VectorXd pv(lin.space.n_dofs());
    for (int i = 0; i < lin.space.n_dofs(); ++i) pv[i] = lin.space.constraint_value[i];
    newton_solve(model, {}, lin.space.constrained, pv, u_lin, {});
  }

  auto gap = [&](double eps) {
    MonolithicProblem scaled = mp;
    scaled.load.s = mp.load.s * eps;
    scaled.load.g_scale = eps;
    Eigen::VectorXd u;
    NewtonConfig cfg;
    cfg.abstol = 1e-14;
    solve_monolithic(scaled, u, cfg);
    return (u - eps * u_lin).norm();
  };
  const double g2 = gap(1e-2), g3 = gap(1e-3);
  REQUIRE(g2 / g3 > 30.0);   // second-order vanishing: ratio ~ 100
  REQUIRE(g2 / g3 < 300.0);
  REQUIRE(g2 < 1e-2 * u_lin.norm());
}

TEST_CASE("two identical overlapping components have a vanishing jump objective") {
  const ComponentLibrary& lib = library();
  DeployedSystem sys;
  sys.lib = &lib;
  for (int rep = 0; rep < 2; ++rep) {
    DeployedComponent c;
    c.arch = 0;
    const double shift = 0.3;
    c.mu = Eigen::Vector3d(26.0, 0.5, shift);
    c.map = PwlMap::shift(0.0, lib.geom.internal_width(), shift);
    c.mesh = apply_map(lib.internal.mesh(), c.map);
    c.mats = detail::band_materials(c.mesh, 26.0, 15.0, 15.0);
    c.load.s = 0.5;
    c.load.g_scale = 0.0;
    sys.comps.push_back(std::move(c));
  }
  detail::compute_port_ownership(sys);
  const HfCbSolution sol = solve_hf_cb(sys, {});
  REQUIRE(sol.objective < 1e-16);
  REQUIRE((sol.fields[0] - sol.fields[1]).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("component-based solution matches the monolithic one in H1") {
  GlobalParams p{27.0, 12.0, 18.0, 0.5, 2};
  const ComponentLibrary lib = ComponentLibrary::build(fine_geom());
  DeployedSystem sys = instantiate(lib, p);
  NewtonConfig cfg;
  const HfCbSolution sol = solve_hf_cb(sys, cfg);
  REQUIRE(sol.objective_history.size() >= 2);
  for (std::size_t k = 1; k < sol.objective_history.size(); ++k)
    REQUIRE(sol.objective_history[k] <= sol.objective_history[k - 1] + 1e-30);

  MonolithicProblem mp = build_monolithic(fine_geom(), p, 1.0 / 48.0);
  Eigen::VectorXd u_mono;
  solve_monolithic(mp, u_mono, cfg);

  PouField pf;
  pf.sys = &sys;
  pf.pou.sys = &sys;
  pf.fields = &sol.fields;

  Eigen::VectorXd v2;
  Eigen::MatrixXd g2;
  const double gap = h1_norm_background(
      [&](const Eigen::Vector2d& x, Eigen::VectorXd& v, Eigen::MatrixXd& g) {
        pf.value_grad(x, v, g);
        const Located loc = mp.mesh().locate(x);
        v -= mp.mesh().value_at(loc, u_mono, 2);
        g -= mp.mesh().grad_at(loc, u_mono, 2);
      },
      24);
  const double ref = h1_norm_background(
      [&](const Eigen::Vector2d& x, Eigen::VectorXd& v, Eigen::MatrixXd& g) {
        const Located loc = mp.mesh().locate(x);
        v = mp.mesh().value_at(loc, u_mono, 2);
        g = mp.mesh().grad_at(loc, u_mono, 2);
      },
      24);
  REQUIRE(gap < 1e-2 * ref);
}
