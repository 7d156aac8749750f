#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "os2/component.hpp"

using namespace os2;

namespace {

GeomConfig coarse_geom() {
  GeomConfig g;
  g.int_nx = 6;
  g.int_ny = 8;
  g.ext_h = 1.0 / 12.0;
  return g;
}

const ComponentLibrary& library() {
  static ComponentLibrary lib = ComponentLibrary::build(coarse_geom());
  return lib;
}

Eigen::VectorXd random_trace(const Archetype& arch, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gn;
  Eigen::VectorXd w(arch.n_port());
  for (int i = 0; i < arch.n_port(); ++i) w[i] = gn(rng);
  return w;
}

}  // namespace

TEST_CASE("internal port quadrature measures three sides of the box") {
  const Archetype& arch = library().internal;
  double sum = 0;
  for (const BoundaryQP& qp : arch.port_qp) sum += qp.w;
  const GeomConfig& g = library().geom;
  REQUIRE(sum == Catch::Approx(g.internal_width() + 2.0 * g.internal_height()).epsilon(1e-12));
}

TEST_CASE("two internal components plus one external make three subdomains") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 2});
  REQUIRE(sys.n_dd() == 3);
  REQUIRE(sys.comps[0].arch == 0);
  REQUIRE(sys.comps[2].arch == 1);
  // every component has at least one neighbor and the external is everyone's
  for (int i = 0; i < 2; ++i)
    REQUIRE(std::find(sys.neigh[i].begin(), sys.neigh[i].end(), 2) != sys.neigh[i].end());
}

TEST_CASE("overlap wider than the spacing is rejected") {
  GeomConfig g = coarse_geom();
  g.delta = g.d;
  REQUIRE_THROWS(ComponentLibrary::build(g));
}

TEST_CASE("right edge of an internal component is covered by its successor") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 3});
  const GeomConfig& g = library().geom;
  const double right0 = sys.comps[0].map.bphys.back();
  double ymin = 1e30, ymax = -1e30;
  for (const PortPointInfo& p : sys.ports[0]) {
    if (std::abs(p.xphys[0] - right0) > 1e-12) continue;
    bool owned_by_next = false;
    for (const PortOwner& o : p.owners) owned_by_next |= o.j == 1;
    REQUIRE(owned_by_next);
    ymin = std::min(ymin, p.xphys[1]);
    ymax = std::max(ymax, p.xphys[1]);
  }
  // Gauss points stay inside facets; the covered span matches h = 2d up to
  // the end-point offset of the 3-point rule on the first/last facet
  const double facet_h = g.internal_height() / g.int_ny;
  REQUIRE(ymax - ymin > g.internal_height() - facet_h);
}

TEST_CASE("external port points have one internal owner away from corner strips") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 3});
  const GeomConfig& g = library().geom;
  const int ext = sys.n_dd() - 1;
  for (const PortPointInfo& p : sys.ports[ext]) {
    REQUIRE(p.owners.size() >= 1);
    REQUIRE(p.owners.size() <= 2);
    for (const PortOwner& o : p.owners) REQUIRE(o.j != ext);
    if (p.owners.size() == 2) {
      // double ownership only inside the delta-wide vertical overlap strips
      bool in_strip = false;
      for (int i = 0; i + 1 < ext; ++i) {
        const double strip_lo = sys.comps[i + 1].map.bphys.front();
        const double strip_hi = sys.comps[i].map.bphys.back();
        in_strip |= p.xphys[0] > strip_lo - 1e-12 && p.xphys[0] < strip_hi + 1e-12;
      }
      REQUIRE(in_strip);
    }
  }
  (void)g;
}

TEST_CASE("instantiation is deterministic") {
  DeployedSystem a = instantiate(library(), {26.0, 11.0, 19.0, 0.9, 4});
  DeployedSystem b = instantiate(library(), {26.0, 11.0, 19.0, 0.9, 4});
  REQUIRE(a.n_dd() == b.n_dd());
  for (int i = 0; i < a.n_dd(); ++i) {
    REQUIRE(a.comps[i].mesh.nodes == b.comps[i].mesh.nodes);
    REQUIRE(a.neigh[i] == b.neigh[i]);
    REQUIRE(a.ports[i].size() == b.ports[i].size());
    for (std::size_t q = 0; q < a.ports[i].size(); ++q) {
      REQUIRE(a.ports[i][q].owners.size() == b.ports[i][q].owners.size());
      for (std::size_t k = 0; k < a.ports[i][q].owners.size(); ++k) {
        REQUIRE(a.ports[i][q].owners[k].j == b.ports[i][q].owners[k].j);
        REQUIRE(a.ports[i][q].owners[k].loc.elem == b.ports[i][q].owners[k].loc.elem);
      }
    }
  }
}

TEST_CASE("deployed interpolation agrees with reference interpolation at nodes") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 2});
  const int ext = sys.n_dd() - 1;
  const Archetype& arch = sys.arch_of(ext);
  const Mesh& ref = arch.mesh();
  const Mesh& dep = sys.comps[ext].mesh;
  Eigen::VectorXd u = random_trace(arch, 91).replicate(1, 1);
  u = Eigen::VectorXd::Zero(arch.space.n_dofs());
  std::mt19937 rng(19);
  std::normal_distribution<double> gn;
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = gn(rng);
  for (int j = 0; j < ref.n_nodes(); j += 7) {
    const Eigen::Vector2d xr = ref.nodes.row(j).transpose();
    const Eigen::Vector2d xd = sys.comps[ext].map.apply(xr);
    const Eigen::VectorXd a = dep.interpolate(xd, u, 2);
    REQUIRE(a[0] == Catch::Approx(u[2 * j]).margin(1e-13));
    REQUIRE(a[1] == Catch::Approx(u[2 * j + 1]).margin(1e-13));
  }
}

TEST_CASE("extension of the zero trace is zero") {
  const Archetype& arch = library().internal;
  const Eigen::VectorXd u = arch.extend(Eigen::VectorXd::Zero(arch.n_port()));
  REQUIRE(u.norm() == 0.0);
}

TEST_CASE("extension reproduces traces and is idempotent on harmonic fields") {
  for (const Archetype* arch : {&library().internal, &library().external}) {
    const Eigen::VectorXd w = random_trace(*arch, 55);
    const Eigen::VectorXd v = arch->extend(w);
    REQUIRE((arch->trace_of(v) - w).lpNorm<Eigen::Infinity>() < 1e-12);
    const Eigen::VectorXd v2 = arch->extend(arch->trace_of(v));
    REQUIRE((v2 - v).norm() < 1e-10 * v.norm());
    // orthogonality to bubbles in the component inner product
    const Eigen::VectorXd Mv = arch->ip.M * v;
    double worst = 0;
    for (int b : arch->bubble_dofs) worst = std::max(worst, std::abs(Mv[b]));
    REQUIRE(worst < 1e-10 * arch->ip.norm(v));
  }
}

TEST_CASE("extension is the minimum-energy lift") {
  const Archetype& arch = library().internal;
  const Eigen::VectorXd w = random_trace(arch, 7);
  const Eigen::VectorXd ew = arch.extend(w);
  const double base = arch.ip.norm(ew);
  std::mt19937 rng(101);
  std::normal_distribution<double> gn;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd v = ew;
    for (int b : arch.bubble_dofs) v[b] += gn(rng);
    REQUIRE(arch.ip.norm(v) >= base - 1e-12);
  }
}

TEST_CASE("partition of unity reproduces constants") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 2});
  std::vector<Eigen::VectorXd> fields;
  for (int i = 0; i < sys.n_dd(); ++i) {
    Eigen::VectorXd c(sys.arch_of(i).space.n_dofs());
    for (int k = 0; k < c.size() / 2; ++k) {
      c[2 * k] = 3.25;
      c[2 * k + 1] = -1.5;
    }
    fields.push_back(c);
  }
  PouField pf;
  pf.sys = &sys;
  pf.pou.sys = &sys;
  pf.fields = &fields;
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> un(1e-3, 1.0 - 1e-3);
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd v = pf.value({un(rng), un(rng)});
    REQUIRE(v[0] == Catch::Approx(3.25).epsilon(1e-12));
    REQUIRE(v[1] == Catch::Approx(-1.5).epsilon(1e-12));
  }
}

TEST_CASE("partition of unity weights sum to one") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 3});
  PartitionOfUnity pou;
  pou.sys = &sys;
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> un(1e-6, 1.0 - 1e-6);
  Eigen::VectorXd phi;
  for (int k = 0; k < 1000; ++k) {
    pou.eval({un(rng), un(rng)}, phi, nullptr);
    REQUIRE(phi.sum() >= 1.0 - 1e-12);
    REQUIRE(phi.sum() <= 1.0 + 1e-12);
    REQUIRE(phi.minCoeff() >= 0.0);
    REQUIRE(phi.maxCoeff() <= 1.0 + 1e-15);
  }
}

TEST_CASE("partition of unity reproduces a global quadratic field") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 2});
  auto f = [](double x, double y, int d) {
    return d == 0 ? 0.3 * x * x - 0.1 * x * y + y : x + 0.8 * y * y;
  };
  std::vector<Eigen::VectorXd> fields;
  for (int i = 0; i < sys.n_dd(); ++i) {
    const Mesh& m = sys.comps[i].mesh;
    Eigen::VectorXd u(m.n_nodes() * 2);
    for (int k = 0; k < m.n_nodes(); ++k)
      for (int d = 0; d < 2; ++d) u[2 * k + d] = f(m.nodes(k, 0), m.nodes(k, 1), d);
    fields.push_back(u);
  }
  PouField pf;
  pf.sys = &sys;
  pf.pou.sys = &sys;
  pf.fields = &fields;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> un(0.01, 0.99);
  for (int k = 0; k < 100; ++k) {
    const double x = un(rng), y = un(rng);
    const Eigen::VectorXd v = pf.value({x, y});
    REQUIRE(v[0] == Catch::Approx(f(x, y, 0)).margin(1e-11));
    REQUIRE(v[1] == Catch::Approx(f(x, y, 1)).margin(1e-11));
  }
}

TEST_CASE("evaluating the partition of unity outside the domain fails") {
  DeployedSystem sys = instantiate(library(), {27.0, 12.0, 18.0, 0.5, 2});
  PartitionOfUnity pou;
  pou.sys = &sys;
  Eigen::VectorXd phi;
  REQUIRE_THROWS_AS(pou.eval({1.7, 0.4}, phi, nullptr), OutsideDomainError);
}
