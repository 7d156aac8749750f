#ifndef OS2_COMPONENT_HPP
#define OS2_COMPONENT_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "os2/fe_space.hpp"
#include "os2/mesh.hpp"
#include "os2/neohookean.hpp"

// Archetype components of the benchmark (an internal box with a traction
// region on its bottom edge, and an external unit square with a notch cut
// out), their geometric mapping families, deployed-system instantiation
// with port-point ownership, the discrete extension operator and the
// partition of unity used for global error measurement.

namespace os2 {

struct GeomConfig {
  double d = 0.125;        // spacing between traction regions
  double delta = 0.03125;  // overlap width
  double lr = 0.0625;      // traction region width
  int q_ref = 2;           // notch width of the reference external geometry
  int int_nx = 10, int_ny = 16;
  double ext_h = 1.0 / 24.0;
  int grade_levels = 2;  // geometric refinement toward the traction corners
  int degree = 2;
  int boundary_gauss = 3;

  double internal_width() const { return d + delta; }
  double internal_height() const { return 2.0 * d; }
  double notch_height() const { return 2.0 * d - delta; }
  double d_ext(int qa) const { return qa * d - delta; }

  void validate() const {
    if (delta >= d) throw std::invalid_argument("overlap delta must be smaller than d");
    if (lr >= d) throw std::invalid_argument("traction width lr must be smaller than d");
    if (2.0 * d > 1.0 / 3.0 + 1e-12)
      throw std::invalid_argument("internal components must fit inside the first material band");
  }
};

// Piecewise-linear map in x, identity in y.
struct PwlMap {
  std::vector<double> bref, bphys;

  static PwlMap shift(double x0_ref, double x1_ref, double s) {
    PwlMap m;
    m.bref = {x0_ref, x1_ref};
    m.bphys = {x0_ref + s, x1_ref + s};
    return m;
  }

  int segment(double x) const {
    int j = static_cast<int>(std::upper_bound(bref.begin(), bref.end(), x) - bref.begin()) - 1;
    return std::clamp(j, 0, static_cast<int>(bref.size()) - 2);
  }
  double apply_x(double x) const {
    const int j = segment(x);
    const double t = (x - bref[j]) / (bref[j + 1] - bref[j]);
    return bphys[j] + t * (bphys[j + 1] - bphys[j]);
  }
  double slope(double x) const {
    const int j = segment(x);
    return (bphys[j + 1] - bphys[j]) / (bref[j + 1] - bref[j]);
  }
  double inv_x(double x) const {
    int j = static_cast<int>(std::upper_bound(bphys.begin(), bphys.end(), x) - bphys.begin()) - 1;
    j = std::clamp(j, 0, static_cast<int>(bphys.size()) - 2);
    const double t = (x - bphys[j]) / (bphys[j + 1] - bphys[j]);
    return bref[j] + t * (bref[j + 1] - bref[j]);
  }
  Eigen::Vector2d apply(const Eigen::Vector2d& x) const { return {apply_x(x[0]), x[1]}; }
  Eigen::Vector2d inverse(const Eigen::Vector2d& x) const { return {inv_x(x[0]), x[1]}; }

  // Boundary-measure factor |det(grad Phi) grad Phi^-T n| for a reference
  // outward normal n at reference abscissa x.
  double boundary_jacobian(double x, const Eigen::Vector2d& n) const {
    const double a = slope(x);
    return std::sqrt(n[0] * n[0] + a * a * n[1] * n[1]);
  }
};

inline Mesh apply_map(const Mesh& ref, const PwlMap& map) {
  Mesh m = ref;
  for (Eigen::Index i = 0; i < m.nodes.rows(); ++i)
    m.nodes(i, 0) = map.apply_x(m.nodes(i, 0));
  for (double& k : m.knots_x) k = map.apply_x(k);
  return m;
}

enum class ArchLabel { Internal = 0, External = 1 };

// An archetype component: reference mesh and space, inner product, port
// bookkeeping, the harmonic-extension factorization, and the offline
// payloads filled by training (reduced bases, sparse quadrature weights,
// interpolation points, coefficient sample means).
struct Archetype {
  ArchLabel label = ArchLabel::Internal;
  GeomConfig geom;
  // shared so that copies of the archetype keep the space's mesh pointer valid
  std::shared_ptr<Mesh> mesh_p;
  FeSpace space;
  InnerProduct ip;

  const Mesh& mesh() const { return *mesh_p; }

  std::vector<int> port_dofs;             // unconstrained dofs on port facets
  std::vector<int> bubble_dofs;           // remaining free dofs
  std::vector<int> dof_kind;              // -1 constrained, -2 bubble slot, >=0 port slot
  std::vector<int> bubble_slot;           // dof -> bubble index or -1
  std::vector<BoundaryQP> port_qp;        // reference port quadrature

  Eigen::SparseMatrix<double> Xbb, Xbp;
  std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> bubble_factor;

  // offline payloads (empty until trained)
  Eigen::MatrixXd Zb, Wp;
  Eigen::VectorXd sv_b, sv_p;
  Eigen::VectorXd rho_eq;        // element weights for the local residuals
  Eigen::VectorXd rho_p_eq;      // port weights for the objective
  std::vector<int> eim_points;   // port quadrature indices selected by EIM
  Eigen::VectorXd alpha_mean, beta_mean;

  int n_port() const { return static_cast<int>(port_dofs.size()); }
  int n_bubble() const { return static_cast<int>(bubble_dofs.size()); }

  void finalize() {
    // classify dofs and factorize the bubble block of the inner product
    const int N = space.n_dofs();
    std::vector<std::uint8_t> on_port(N, 0);
    for (int node : space.tag_nodes("port"))
      for (int d = 0; d < space.D; ++d) on_port[node * space.D + d] = 1;
    port_dofs.clear();
    bubble_dofs.clear();
    dof_kind.assign(N, -2);
    bubble_slot.assign(N, -1);
    for (int i = 0; i < N; ++i) {
      if (space.constrained[i]) {
        dof_kind[i] = -1;
      } else if (on_port[i]) {
        dof_kind[i] = static_cast<int>(port_dofs.size());
        port_dofs.push_back(i);
      } else {
        bubble_slot[i] = static_cast<int>(bubble_dofs.size());
        bubble_dofs.push_back(i);
      }
    }
    const int nb = n_bubble(), np = n_port();
    std::vector<Eigen::Triplet<double>> tbb, tbp;
    for (int k = 0; k < ip.M.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(ip.M, k); it; ++it) {
        const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
        if (bubble_slot[r] < 0) continue;
        if (bubble_slot[c] >= 0)
          tbb.emplace_back(bubble_slot[r], bubble_slot[c], it.value());
        else if (dof_kind[c] >= 0)
          tbp.emplace_back(bubble_slot[r], dof_kind[c], it.value());
      }
    Xbb.resize(nb, nb);
    Xbb.setFromTriplets(tbb.begin(), tbb.end());
    Xbp.resize(nb, np);
    Xbp.setFromTriplets(tbp.begin(), tbp.end());
    bubble_factor = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
    bubble_factor->compute(Xbb);
    if (bubble_factor->info() != Eigen::Success)
      throw std::runtime_error("extension operator: bubble block factorization failed");
    port_qp = boundary_quadrature(*mesh_p, "port", geom.boundary_gauss);
  }

  // Discretely harmonic lift of a port trace: the trace is reproduced
  // exactly and the result is inner-product-orthogonal to every bubble.
  Eigen::VectorXd extend(const Eigen::VectorXd& w) const {
    if (w.size() != n_port()) throw std::invalid_argument("extend: trace size mismatch");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(space.n_dofs());
    for (int k = 0; k < n_port(); ++k) u[port_dofs[k]] = w[k];
    const Eigen::VectorXd rhs = -(Xbp * w);
    const Eigen::VectorXd ub = bubble_factor->solve(rhs);
    for (int k = 0; k < n_bubble(); ++k) u[bubble_dofs[k]] = ub[k];
    return u;
  }

  Eigen::VectorXd trace_of(const Eigen::VectorXd& u) const {
    Eigen::VectorXd w(n_port());
    for (int k = 0; k < n_port(); ++k) w[k] = u[port_dofs[k]];
    return w;
  }

  // Bubble/port split of a field: u = (u - E(trace)) + E(trace).
  void split(const Eigen::VectorXd& u, Eigen::VectorXd& bubble, Eigen::VectorXd& port) const {
    port = extend(trace_of(u));
    bubble = u - port;
  }
};

namespace detail {

inline std::vector<Facet> boundary_facets(const Mesh& mesh) {
  std::vector<Facet> out;
  const int nx = mesh.nx(), ny = mesh.ny();
  auto cell = [&](int cx, int cy) -> int {
    if (cx < 0 || cy < 0 || cx >= nx || cy >= ny) return -1;
    return mesh.cell_elem[static_cast<std::size_t>(cy) * nx + cx];
  };
  for (int cy = 0; cy < ny; ++cy)
    for (int cx = 0; cx < nx; ++cx) {
      const int e = cell(cx, cy);
      if (e < 0) continue;
      if (cell(cx, cy - 1) < 0) out.push_back({e, 0});
      if (cell(cx + 1, cy) < 0) out.push_back({e, 1});
      if (cell(cx, cy + 1) < 0) out.push_back({e, 2});
      if (cell(cx - 1, cy) < 0) out.push_back({e, 3});
    }
  return out;
}

inline Eigen::Vector2d facet_midpoint(const Mesh& mesh, const Facet& f) {
  const auto locals = mesh.edge_locals(f.edge);
  const Eigen::Vector2d a = mesh.nodes.row(mesh.conn(f.elem, locals.front())).transpose();
  const Eigen::Vector2d b = mesh.nodes.row(mesh.conn(f.elem, locals.back())).transpose();
  return 0.5 * (a + b);
}

}  // namespace detail

inline Archetype build_internal_archetype(const GeomConfig& cfg) {
  cfg.validate();
  auto arch = Archetype{};
  arch.label = ArchLabel::Internal;
  arch.geom = cfg;
  const double w = cfg.internal_width(), h = cfg.internal_height();
  const double xl = 0.5 * (w - cfg.lr), xr = 0.5 * (w + cfg.lr);
  auto kx = knots_with_breaks(0.0, w, w / cfg.int_nx, {xl, xr});
  auto ky = knots_with_breaks(0.0, h, h / cfg.int_ny);
  grade_knots(kx, {xl, xr}, cfg.grade_levels);
  grade_knots(ky, {0.0}, cfg.grade_levels);
  arch.mesh_p = std::make_shared<Mesh>(Mesh::tensor2d(kx, ky, cfg.degree));
  Mesh& mesh = *arch.mesh_p;

  std::vector<Facet> dir, neu, port;
  for (const Facet& f : detail::boundary_facets(mesh)) {
    const Eigen::Vector2d mid = detail::facet_midpoint(mesh, f);
    if (f.edge == 0 && mid[1] < 1e-14) {
      if (mid[0] > xl && mid[0] < xr)
        neu.push_back(f);
      else
        dir.push_back(f);
    } else {
      port.push_back(f);
    }
  }
  mesh.tags["dir"] = dir;
  mesh.tags["neumann-r"] = neu;
  mesh.tags["port"] = port;

  arch.space = FeSpace(mesh, 2);
  arch.space.constrain("dir");
  arch.ip = assemble_inner_product(arch.space, IpKind::H1);
  arch.finalize();
  return arch;
}

inline Archetype build_external_archetype(const GeomConfig& cfg) {
  cfg.validate();
  auto arch = Archetype{};
  arch.label = ArchLabel::External;
  arch.geom = cfg;
  const double dref = cfg.d_ext(cfg.q_ref);
  const double a = 0.5 * (1.0 - dref), b = 0.5 * (1.0 + dref);
  const double hn = cfg.notch_height();
  const auto kx = knots_with_breaks(0.0, 1.0, cfg.ext_h, {a, b});
  const auto ky = knots_with_breaks(0.0, 1.0, cfg.ext_h, {hn, 1.0 / 3.0, 2.0 / 3.0});
  const int nx = static_cast<int>(kx.size()) - 1, ny = static_cast<int>(ky.size()) - 1;
  std::vector<std::uint8_t> active(static_cast<std::size_t>(nx) * ny, 1);
  for (int cy = 0; cy < ny; ++cy)
    for (int cx = 0; cx < nx; ++cx) {
      const double mx = 0.5 * (kx[cx] + kx[cx + 1]);
      const double my = 0.5 * (ky[cy] + ky[cy + 1]);
      if (mx > a && mx < b && my < hn) active[static_cast<std::size_t>(cy) * nx + cx] = 0;
    }
  arch.mesh_p = std::make_shared<Mesh>(Mesh::tensor2d(kx, ky, cfg.degree, active));
  Mesh& mesh = *arch.mesh_p;

  std::vector<Facet> dir, sym, top, port;
  for (const Facet& f : detail::boundary_facets(mesh)) {
    const Eigen::Vector2d mid = detail::facet_midpoint(mesh, f);
    if (mid[1] < 1e-14)
      dir.push_back(f);
    else if (mid[1] > 1.0 - 1e-14)
      top.push_back(f);
    else if (mid[0] < 1e-14 || mid[0] > 1.0 - 1e-14)
      sym.push_back(f);
    else
      port.push_back(f);
  }
  mesh.tags["dir"] = dir;
  mesh.tags["symmetry"] = sym;
  mesh.tags["neumann-top"] = top;
  mesh.tags["port"] = port;

  arch.space = FeSpace(mesh, 2);
  arch.space.constrain("dir");
  arch.space.constrain("symmetry", 0);  // u . n = 0 on the vertical sides
  arch.ip = assemble_inner_product(arch.space, IpKind::H1);
  arch.finalize();
  return arch;
}

struct ComponentLibrary {
  GeomConfig geom;
  Archetype internal;
  Archetype external;

  const Archetype& arch(int a) const { return a == 0 ? internal : external; }
  static ComponentLibrary build(const GeomConfig& cfg) {
    ComponentLibrary lib;
    lib.geom = cfg;
    lib.internal = build_internal_archetype(cfg);
    lib.external = build_external_archetype(cfg);
    return lib;
  }
};

struct GlobalParams {
  double E1 = 27.0, E2 = 15.0, E3 = 15.0, s = 0.7;
  int qa = 2;
};

struct DeployedComponent {
  int arch = 0;  // 0 internal, 1 external
  Eigen::VectorXd mu;
  PwlMap map;
  Mesh mesh;  // deployed copy
  std::vector<Material> mats;
  LoadSpec load;
};

struct PortOwner {
  int j = -1;
  Located loc;
};

struct PortPointInfo {
  Eigen::Vector2d xref, xphys;
  double rho_hf = 0;  // reference boundary quadrature weight
  double jbnd = 1;    // boundary-measure factor of the component's map
  std::vector<PortOwner> owners;
};

struct DeployedSystem {
  const ComponentLibrary* lib = nullptr;
  std::vector<DeployedComponent> comps;
  std::vector<std::vector<PortPointInfo>> ports;
  std::vector<std::vector<int>> neigh;

  int n_dd() const { return static_cast<int>(comps.size()); }
  const Archetype& arch_of(int i) const { return lib->arch(comps[i].arch); }
};

namespace detail {

inline std::vector<Material> band_materials(const Mesh& mesh, double E1, double E2,
                                            double E3, double nu = 0.3) {
  std::vector<Material> mats(mesh.n_elems());
  for (int e = 0; e < mesh.n_elems(); ++e) {
    double cy = 0;
    for (int l = 0; l < mesh.n_lp(); ++l) cy += mesh.nodes(mesh.conn(e, l), 1);
    cy /= mesh.n_lp();
    const double E = cy < 1.0 / 3.0 ? E1 : (cy < 2.0 / 3.0 ? E2 : E3);
    mats[e] = Material::plane_stress(E, nu);
  }
  return mats;
}

inline void compute_port_ownership(DeployedSystem& sys, double tol = 1e-10) {
  sys.ports.assign(sys.n_dd(), {});
  sys.neigh.assign(sys.n_dd(), {});
  for (int i = 0; i < sys.n_dd(); ++i) {
    const Archetype& arch = sys.arch_of(i);
    sys.ports[i].reserve(arch.port_qp.size());
    for (const BoundaryQP& qp : arch.port_qp) {
      PortPointInfo info;
      info.xref = qp.x;
      info.xphys = sys.comps[i].map.apply(qp.x);
      info.rho_hf = qp.w;
      info.jbnd = sys.comps[i].map.boundary_jacobian(qp.x[0], qp.normal);
      for (int j = 0; j < sys.n_dd(); ++j) {
        if (j == i) continue;
        auto loc = sys.comps[j].mesh.try_locate(info.xphys, tol);
        if (loc) info.owners.push_back({j, *loc});
      }
      if (info.owners.empty())
        throw std::runtime_error("port quadrature point of component " + std::to_string(i) +
                                 " is not covered by any neighbor (overlap misconfiguration)");
      for (const PortOwner& o : info.owners)
        if (std::find(sys.neigh[i].begin(), sys.neigh[i].end(), o.j) == sys.neigh[i].end())
          sys.neigh[i].push_back(o.j);
      sys.ports[i].push_back(std::move(info));
    }
    std::sort(sys.neigh[i].begin(), sys.neigh[i].end());
  }
}

}  // namespace detail

// Instantiate the benchmark family: qa internal components tiling the
// traction regions plus one external component, with port ownership
// resolved by point-in-component tests.
inline DeployedSystem instantiate(const ComponentLibrary& lib, const GlobalParams& p) {
  lib.geom.validate();
  if (p.qa < 2) throw std::invalid_argument("need at least two internal components");
  const GeomConfig& g = lib.geom;
  const double dext = g.d_ext(p.qa);
  const double c0 = 0.5 * (1.0 - dext);
  if (c0 <= g.delta)
    throw std::invalid_argument("deployed notch does not fit inside the unit square");

  DeployedSystem sys;
  sys.lib = &lib;
  for (int i = 0; i < p.qa; ++i) {
    DeployedComponent c;
    c.arch = 0;
    const double shift = c0 - g.delta + i * g.d;
    c.mu = Eigen::Vector3d(p.E1, p.s, shift);
    c.map = PwlMap::shift(0.0, g.internal_width(), shift);
    c.mesh = apply_map(lib.internal.mesh(), c.map);
    c.mats = detail::band_materials(c.mesh, p.E1, p.E2, p.E3);
    c.load.s = p.s;
    c.load.g_scale = 0.0;
    sys.comps.push_back(std::move(c));
  }
  {
    DeployedComponent c;
    c.arch = 1;
    c.mu = Eigen::Vector4d(p.E1, p.E2, p.E3, dext);
    const double dref = g.d_ext(g.q_ref);
    const double aref = 0.5 * (1.0 - dref), bref = 0.5 * (1.0 + dref);
    c.map.bref = {0.0, aref, bref, 1.0};
    c.map.bphys = {0.0, c0, c0 + dext, 1.0};
    c.mesh = apply_map(lib.external.mesh(), c.map);
    c.mats = detail::band_materials(c.mesh, p.E1, p.E2, p.E3);
    c.load.s = 0.0;
    c.load.g_scale = 1.0;
    sys.comps.push_back(std::move(c));
  }
  detail::compute_port_ownership(sys);
  return sys;
}

inline ComponentModel component_model(const DeployedSystem& sys, int i) {
  ComponentModel m;
  m.mesh = &sys.comps[i].mesh;
  m.space = &sys.arch_of(i).space;
  m.kind = PdeKind::NeoHookean;
  m.mat = sys.comps[i].mats;
  m.load = sys.comps[i].load;
  return m;
}

// --- partition of unity ---------------------------------------------------

namespace detail {

inline double seg_dist(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                       const Eigen::Vector2d& b, Eigen::Vector2d* grad) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp(ab.dot(p - a) / ab.squaredNorm(), 0.0, 1.0);
  const Eigen::Vector2d q = a + t * ab;
  const double d = (p - q).norm();
  if (grad) *grad = d > 0 ? Eigen::Vector2d((p - q) / d) : Eigen::Vector2d(0, 0);
  return d;
}

// Distance to the deployed port polyline of component i.
inline double port_distance(const DeployedSystem& sys, int i, const Eigen::Vector2d& x,
                            Eigen::Vector2d* grad) {
  const DeployedComponent& c = sys.comps[i];
  const GeomConfig& g = sys.lib->geom;
  double x0, x1, h;
  if (c.arch == 0) {
    x0 = c.map.bphys.front();
    x1 = c.map.bphys.back();
    h = g.internal_height();
  } else {
    x0 = c.map.bphys[1];
    x1 = c.map.bphys[2];
    h = g.notch_height();
  }
  const Eigen::Vector2d bl(x0, 0), tl(x0, h), tr(x1, h), br(x1, 0);
  double best = std::numeric_limits<double>::max();
  Eigen::Vector2d bg(0, 0), gseg;
  for (const auto& [sa, sb] : {std::pair{bl, tl}, std::pair{tl, tr}, std::pair{br, tr}}) {
    const double d = seg_dist(x, sa, sb, grad ? &gseg : nullptr);
    if (d < best) {
      best = d;
      bg = gseg;
    }
  }
  if (grad) *grad = bg;
  return best;
}

}  // namespace detail

// Shepard weights built from distances to the ports: Lipschitz, supported in
// the owning component, and summing to one over the global domain.
struct PartitionOfUnity {
  const DeployedSystem* sys = nullptr;
  double tol = 1e-10;

  // phi (and optionally its gradients, 2 columns per component); components
  // not containing x get exact zeros. Returns the located element per
  // containing component for reuse by field evaluation.
  void eval(const Eigen::Vector2d& x, Eigen::VectorXd& phi, Eigen::MatrixXd* dphi,
            std::vector<std::optional<Located>>* locs = nullptr) const {
    const int n = sys->n_dd();
    phi.setZero(n);
    if (dphi) dphi->setZero(n, 2);
    Eigen::VectorXd dist = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd dgrad = Eigen::MatrixXd::Zero(n, 2);
    if (locs) locs->assign(n, std::nullopt);
    double sum = 0;
    Eigen::Vector2d sumg(0, 0);
    std::vector<int> inside;
    for (int i = 0; i < n; ++i) {
      auto loc = sys->comps[i].mesh.try_locate(x, tol);
      if (!loc) continue;
      if (locs) (*locs)[i] = loc;
      inside.push_back(i);
      Eigen::Vector2d g;
      dist[i] = detail::port_distance(*sys, i, x, dphi ? &g : nullptr);
      if (dphi) dgrad.row(i) = g.transpose();
      sum += dist[i];
      if (dphi) sumg += g;
    }
    if (inside.empty()) throw OutsideDomainError(0.0);
    if (sum <= 0.0)
      throw std::runtime_error("partition of unity degenerate (point on several ports)");
    for (int i : inside) {
      phi[i] = dist[i] / sum;
      if (dphi)
        dphi->row(i) = (dgrad.row(i) * sum - dist[i] * sumg.transpose()) / (sum * sum);
    }
  }
};

// Global field evaluator sum_i phi_i u_i for per-component dof vectors.
struct PouField {
  const DeployedSystem* sys = nullptr;
  PartitionOfUnity pou;
  const std::vector<Eigen::VectorXd>* fields = nullptr;
  int D = 2;

  Eigen::VectorXd value(const Eigen::Vector2d& x) const {
    Eigen::VectorXd phi;
    std::vector<std::optional<Located>> locs;
    pou.eval(x, phi, nullptr, &locs);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(D);
    for (int i = 0; i < sys->n_dd(); ++i)
      if (locs[i] && phi[i] != 0.0)
        v += phi[i] * sys->comps[i].mesh.value_at(*locs[i], (*fields)[i], D);
    return v;
  }

  void value_grad(const Eigen::Vector2d& x, Eigen::VectorXd& v, Eigen::MatrixXd& g) const {
    Eigen::VectorXd phi;
    Eigen::MatrixXd dphi;
    std::vector<std::optional<Located>> locs;
    pou.eval(x, phi, &dphi, &locs);
    v.setZero(D);
    g.setZero(D, 2);
    for (int i = 0; i < sys->n_dd(); ++i) {
      if (!locs[i]) continue;
      const Eigen::VectorXd vi = sys->comps[i].mesh.value_at(*locs[i], (*fields)[i], D);
      const Eigen::MatrixXd gi = sys->comps[i].mesh.grad_at(*locs[i], (*fields)[i], D);
      v += phi[i] * vi;
      g += phi[i] * gi + vi * dphi.row(i);
    }
  }
};

// H1-norm quadrature over a uniform background grid covering the unit
// square, 2x2 Gauss per cell; eval(x, v, g) fills value and gradient of the
// integrand field (PoU-combined fields live on no single mesh).
template <class F>
double h1_norm_background(F&& eval, int grid_n) {
  const GaussRule g = gauss_rule(2);
  const double h = 1.0 / grid_n;
  double acc = 0;
  Eigen::VectorXd v;
  Eigen::MatrixXd gr;
  for (int cy = 0; cy < grid_n; ++cy)
    for (int cx = 0; cx < grid_n; ++cx)
      for (std::size_t qy = 0; qy < g.pts.size(); ++qy)
        for (std::size_t qx = 0; qx < g.pts.size(); ++qx) {
          const Eigen::Vector2d x(h * (cx + 0.5 * (g.pts[qx] + 1.0)),
                                  h * (cy + 0.5 * (g.pts[qy] + 1.0)));
          const double w = g.wts[qx] * g.wts[qy] * h * h / 4.0;
          eval(x, v, gr);
          acc += w * (v.squaredNorm() + gr.squaredNorm());
        }
  return std::sqrt(acc);
}

}  // namespace os2

#endif  // OS2_COMPONENT_HPP
