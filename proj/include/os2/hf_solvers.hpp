#ifndef OS2_HF_SOLVERS_HPP
#define OS2_HF_SOLVERS_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "os2/component.hpp"
#include "os2/neohookean.hpp"

// Reference full-order solvers: a monolithic Newton solver on the global
// domain and the component-based full-order model (Gauss-Newton over the
// high-fidelity port traces with exact local Dirichlet solves). The latter
// generates all training and test data.

namespace os2 {

struct NewtonConfig {
  double abstol = 1e-10;
  int maxit = 40;
  double backtrack = 0.5;
  int max_backtracks = 20;
  // Gauss-Newton loop over port unknowns
  double gn_step_tol = 1e-8;
  int gn_maxit = 60;
};

struct NewtonReport {
  int iterations = 0;
  std::vector<double> residual_history;
};

namespace detail {

struct DofPartition {
  std::vector<int> free;
  std::vector<int> slot;  // dof -> free slot or -1

  static DofPartition from_pinned(const std::vector<std::uint8_t>& pinned) {
    DofPartition p;
    p.slot.assign(pinned.size(), -1);
    for (std::size_t i = 0; i < pinned.size(); ++i)
      if (!pinned[i]) {
        p.slot[i] = static_cast<int>(p.free.size());
        p.free.push_back(static_cast<int>(i));
      }
    return p;
  }
};

inline Eigen::SparseMatrix<double> restrict_matrix(const Eigen::SparseMatrix<double>& K,
                                                   const DofPartition& part) {
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < K.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it) {
      const int r = part.slot[it.row()], c = part.slot[it.col()];
      if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
    }
  Eigen::SparseMatrix<double> A(static_cast<int>(part.free.size()),
                                static_cast<int>(part.free.size()));
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

inline std::string format_history(const std::vector<double>& h) {
  std::ostringstream os;
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? " " : "") << h[i];
  return os.str();
}

}  // namespace detail

// Newton with residual-norm backtracking on the free dofs; pinned dofs hold
// the given values (Dirichlet data, or port traces in the local solves).
inline NewtonReport newton_solve(const ComponentModel& model, const Eigen::VectorXd& weights,
                                 const std::vector<std::uint8_t>& pinned,
                                 const Eigen::VectorXd& pinned_values, Eigen::VectorXd& u,
                                 const NewtonConfig& cfg) {
  const auto part = detail::DofPartition::from_pinned(pinned);
  for (std::size_t i = 0; i < pinned.size(); ++i)
    if (pinned[i]) u[static_cast<Eigen::Index>(i)] = pinned_values[static_cast<Eigen::Index>(i)];

  NewtonReport rep;
  Eigen::VectorXd R = assemble_residual(model, u, weights);
  double rnorm = detail::gather(R, part.free).norm();
  rep.residual_history.push_back(rnorm);
  if (rnorm < cfg.abstol) return rep;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int it = 0; it < cfg.maxit; ++it) {
    const Eigen::SparseMatrix<double> K =
        detail::restrict_matrix(assemble_jacobian(model, u, weights), part);
    lu.compute(K);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("newton: singular tangent (residuals " +
                               detail::format_history(rep.residual_history) + ")");
    const Eigen::VectorXd du = lu.solve(-detail::gather(R, part.free));

    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      Eigen::VectorXd trial = u;
      for (std::size_t k = 0; k < part.free.size(); ++k)
        trial[part.free[k]] += step * du[static_cast<Eigen::Index>(k)];
      try {
        const Eigen::VectorXd Rt = assemble_residual(model, trial, weights);
        const double tn = detail::gather(Rt, part.free).norm();
        if (tn < rnorm || tn < cfg.abstol) {
          u = trial;
          R = Rt;
          rnorm = tn;
          accepted = true;
          break;
        }
      } catch (const InvertedElementError&) {
        // shrink into the feasible region
      }
      step *= cfg.backtrack;
    }
    rep.iterations = it + 1;
    rep.residual_history.push_back(rnorm);
    if (!accepted)
      throw std::runtime_error("newton: diverged (residuals " +
                               detail::format_history(rep.residual_history) + ")");
    if (rnorm < cfg.abstol) return rep;
  }
  throw std::runtime_error("newton: no convergence after max iterations (residuals " +
                           detail::format_history(rep.residual_history) + ")");
}

// --- monolithic reference solver -------------------------------------------

struct MonolithicProblem {
  std::shared_ptr<Mesh> mesh_p;
  FeSpace space;
  std::vector<Material> mats;
  LoadSpec load;

  const Mesh& mesh() const { return *mesh_p; }
  ComponentModel model() const {
    ComponentModel m;
    m.mesh = mesh_p.get();
    m.space = &space;
    m.mat = mats;
    m.load = load;
    return m;
  }
};

inline MonolithicProblem build_monolithic(const GeomConfig& g, const GlobalParams& p,
                                          double target_h) {
  g.validate();
  const double dext = g.d_ext(p.qa);
  const double c0 = 0.5 * (1.0 - dext);
  std::vector<double> xbreaks;
  std::vector<std::pair<double, double>> regions;
  for (int q = 0; q < p.qa; ++q) {
    const double center = c0 + q * g.d + 0.5 * (g.d - g.delta);
    regions.emplace_back(center - 0.5 * g.lr, center + 0.5 * g.lr);
    xbreaks.push_back(regions.back().first);
    xbreaks.push_back(regions.back().second);
  }
  auto kx = knots_with_breaks(0.0, 1.0, target_h, xbreaks);
  auto ky = knots_with_breaks(0.0, 1.0, target_h, {1.0 / 3.0, 2.0 / 3.0});
  grade_knots(kx, xbreaks, g.grade_levels);
  grade_knots(ky, {0.0}, g.grade_levels);

  MonolithicProblem mp;
  mp.mesh_p = std::make_shared<Mesh>(Mesh::tensor2d(kx, ky, g.degree));
  Mesh& mesh = *mp.mesh_p;
  std::vector<Facet> dir, neu, top, sym;
  for (const Facet& f : detail::boundary_facets(mesh)) {
    const Eigen::Vector2d mid = detail::facet_midpoint(mesh, f);
    if (mid[1] < 1e-14) {
      bool inside = false;
      for (auto [a, b] : regions) inside |= mid[0] > a && mid[0] < b;
      (inside ? neu : dir).push_back(f);
    } else if (mid[1] > 1.0 - 1e-14) {
      top.push_back(f);
    } else {
      sym.push_back(f);
    }
  }
  mesh.tags["dir"] = dir;
  mesh.tags["neumann-r"] = neu;
  mesh.tags["neumann-top"] = top;
  mesh.tags["symmetry"] = sym;

  mp.space = FeSpace(mesh, 2);
  mp.space.constrain("dir");
  mp.space.constrain("symmetry", 0);
  mp.mats = detail::band_materials(mesh, p.E1, p.E2, p.E3);
  mp.load.s = p.s;
  mp.load.g_scale = 1.0;
  return mp;
}

// Plain Newton from zero displacement, with a 4-step load continuation
// fallback for strong loads.
inline NewtonReport solve_monolithic(const MonolithicProblem& mp, Eigen::VectorXd& u,
                                     const NewtonConfig& cfg) {
  u = Eigen::VectorXd::Zero(mp.space.n_dofs());
  Eigen::VectorXd pinned_values(mp.space.n_dofs());
  for (int i = 0; i < mp.space.n_dofs(); ++i) pinned_values[i] = mp.space.constraint_value[i];
  ComponentModel model = mp.model();
  try {
    return newton_solve(model, {}, mp.space.constrained, pinned_values, u, cfg);
  } catch (const std::runtime_error&) {
    u.setZero();
    NewtonReport rep;
    for (int stage = 1; stage <= 4; ++stage) {
      ComponentModel staged = model;
      staged.load.s = model.load.s * stage / 4.0;
      staged.load.g_scale = model.load.g_scale * stage / 4.0;
      rep = newton_solve(staged, {}, mp.space.constrained, pinned_values, u, cfg);
    }
    return rep;
  }
}

// --- component-based full-order model --------------------------------------

struct HfCbSolution {
  std::vector<Eigen::VectorXd> fields;  // full dof vectors per component
  std::vector<Eigen::VectorXd> traces;  // port dof values per component
  double objective = 0;
  int gn_iterations = 0;
  std::vector<double> objective_history;
};

namespace detail {

struct HfCbWorkspace {
  std::vector<std::vector<std::uint8_t>> pinned;        // per component
  std::vector<DofPartition> part;                       // free dofs per component
  std::vector<int> trace_offset;
  int total_trace = 0;
};

inline HfCbWorkspace hfcb_workspace(const DeployedSystem& sys) {
  HfCbWorkspace ws;
  ws.pinned.resize(sys.n_dd());
  ws.part.resize(sys.n_dd());
  ws.trace_offset.resize(sys.n_dd() + 1, 0);
  for (int i = 0; i < sys.n_dd(); ++i) {
    const Archetype& arch = sys.arch_of(i);
    ws.pinned[i] = arch.space.constrained;
    for (int dof : arch.port_dofs) ws.pinned[i][dof] = 1;
    ws.part[i] = DofPartition::from_pinned(ws.pinned[i]);
    ws.trace_offset[i + 1] = ws.trace_offset[i] + arch.n_port();
  }
  ws.total_trace = ws.trace_offset.back();
  return ws;
}

inline void hfcb_local_solve(const DeployedSystem& sys, int i, const HfCbWorkspace& ws,
                             const Eigen::VectorXd& w_i, Eigen::VectorXd& u_i,
                             const NewtonConfig& cfg) {
  const Archetype& arch = sys.arch_of(i);
  Eigen::VectorXd pv(arch.space.n_dofs());
  for (int k = 0; k < arch.space.n_dofs(); ++k) pv[k] = arch.space.constraint_value[k];
  for (int k = 0; k < arch.n_port(); ++k) pv[arch.port_dofs[k]] = w_i[k];
  ComponentModel model = component_model(sys, i);
  try {
    newton_solve(model, {}, ws.pinned[i], pv, u_i, cfg);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("local solve failed in component " + std::to_string(i) + ": " +
                             e.what());
  }
}

}  // namespace detail

// Hybridized jump-minimization over the full port traces; Gauss-Newton with
// objective backtracking. Initial traces are zero.
inline HfCbSolution solve_hf_cb(const DeployedSystem& sys, const NewtonConfig& cfg) {
  const auto ws = detail::hfcb_workspace(sys);
  const int M = ws.total_trace;

  std::vector<Eigen::VectorXd> u(sys.n_dd());
  for (int i = 0; i < sys.n_dd(); ++i)
    u[i] = Eigen::VectorXd::Zero(sys.arch_of(i).space.n_dofs());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(M);

  // row bookkeeping: (component, port point, owner, state dim)
  struct Row {
    int i, q, owner, d;
    double weight;  // sqrt(rho * jbnd)
  };
  std::vector<Row> rows;
  for (int i = 0; i < sys.n_dd(); ++i)
    for (int q = 0; q < static_cast<int>(sys.ports[i].size()); ++q) {
      const PortPointInfo& pp = sys.ports[i][q];
      for (int k = 0; k < static_cast<int>(pp.owners.size()); ++k)
        for (int d = 0; d < 2; ++d)
          rows.push_back({i, q, k, d, std::sqrt(pp.rho_hf * pp.jbnd)});
    }

  auto solve_all = [&](const Eigen::VectorXd& trace, std::vector<Eigen::VectorXd>& fields) {
    for (int i = 0; i < sys.n_dd(); ++i) {
      const Eigen::VectorXd wi =
          trace.segment(ws.trace_offset[i], ws.trace_offset[i + 1] - ws.trace_offset[i]);
      detail::hfcb_local_solve(sys, i, ws, wi, fields[i], cfg);
    }
  };
  auto residual = [&](const std::vector<Eigen::VectorXd>& fields) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Row& row = rows[k];
      const PortPointInfo& pp = sys.ports[row.i][row.q];
      const Archetype& arch = sys.arch_of(row.i);
      const Located own{arch.port_qp[row.q].facet.elem, arch.port_qp[row.q].xi};
      const double vi = sys.comps[row.i].mesh.value_at(own, fields[row.i], 2)[row.d];
      const PortOwner& o = pp.owners[row.owner];
      const double vj = sys.comps[o.j].mesh.value_at(o.loc, fields[o.j], 2)[row.d];
      r[static_cast<Eigen::Index>(k)] = row.weight * (vi - vj);
    }
    return r;
  };

  solve_all(w, u);
  Eigen::VectorXd r = residual(u);
  HfCbSolution sol;
  sol.objective = 0.5 * r.squaredNorm();
  sol.objective_history.push_back(sol.objective);

  Eigen::VectorXd N_own, N_nb;
  for (int it = 0; it < cfg.gn_maxit; ++it) {
    // tangent trace-to-field operators S_i on the free dofs
    std::vector<Eigen::MatrixXd> S(sys.n_dd());
    for (int i = 0; i < sys.n_dd(); ++i) {
      const Archetype& arch = sys.arch_of(i);
      ComponentModel model = component_model(sys, i);
      const Eigen::SparseMatrix<double> K = assemble_jacobian(model, u[i]);
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(
          detail::restrict_matrix(K, ws.part[i]));
      if (lu.info() != Eigen::Success)
        throw std::runtime_error("tangent factorization failed in component " +
                                 std::to_string(i));
      Eigen::MatrixXd rhs =
          Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ws.part[i].free.size()),
                                arch.n_port());
      for (int c = 0; c < arch.n_port(); ++c) {
        const int pdof = arch.port_dofs[c];
        for (Eigen::SparseMatrix<double>::InnerIterator itK(K, pdof); itK; ++itK) {
          const int slot = ws.part[i].slot[itK.row()];
          if (slot >= 0) rhs(slot, c) -= itK.value();
        }
      }
      S[i] = lu.solve(rhs);
    }

    Eigen::MatrixXd Jr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), M);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Row& row = rows[k];
      const PortPointInfo& pp = sys.ports[row.i][row.q];
      const Archetype& arch_i = sys.arch_of(row.i);
      const Mesh& mesh_i = sys.comps[row.i].mesh;
      // own side: only the port dofs of component i enter
      const Located own{arch_i.port_qp[row.q].facet.elem, arch_i.port_qp[row.q].xi};
      shape2d(mesh_i.degree, own.xi, N_own);
      for (int l = 0; l < mesh_i.n_lp(); ++l) {
        const int dof = mesh_i.conn(own.elem, l) * 2 + row.d;
        const int pslot = arch_i.dof_kind[dof];
        if (pslot >= 0)
          Jr(static_cast<Eigen::Index>(k), ws.trace_offset[row.i] + pslot) +=
              row.weight * N_own[l];
      }
      // neighbor side through the local solution operator
      const PortOwner& o = pp.owners[row.owner];
      const Archetype& arch_j = sys.arch_of(o.j);
      const Mesh& mesh_j = sys.comps[o.j].mesh;
      shape2d(mesh_j.degree, o.loc.xi, N_nb);
      for (int l = 0; l < mesh_j.n_lp(); ++l) {
        const int dof = mesh_j.conn(o.loc.elem, l) * 2 + row.d;
        const int pslot = arch_j.dof_kind[dof];
        if (pslot >= 0) {
          Jr(static_cast<Eigen::Index>(k), ws.trace_offset[o.j] + pslot) -=
              row.weight * N_nb[l];
        } else if (ws.part[o.j].slot[dof] >= 0) {
          Jr.row(static_cast<Eigen::Index>(k))
              .segment(ws.trace_offset[o.j], arch_j.n_port()) -=
              row.weight * N_nb[l] * S[o.j].row(ws.part[o.j].slot[dof]);
        }
      }
    }

    const Eigen::VectorXd step = Jr.colPivHouseholderQr().solve(r);
    double t = 1.0;
    bool accepted = false;
    std::vector<Eigen::VectorXd> u_trial = u;
    for (int bt = 0; bt <= 10; ++bt) {
      const Eigen::VectorXd w_trial = w - t * step;
      try {
        solve_all(w_trial, u_trial);
        const Eigen::VectorXd r_trial = residual(u_trial);
        const double f_trial = 0.5 * r_trial.squaredNorm();
        if (f_trial <= sol.objective || f_trial < 1e-28) {
          w = w_trial;
          u = u_trial;
          r = r_trial;
          sol.objective = f_trial;
          accepted = true;
          break;
        }
      } catch (const std::runtime_error&) {
        // local solve failed for this trial step; shrink
      }
      t *= 0.5;
    }
    if (!accepted) break;
    sol.gn_iterations = it + 1;
    sol.objective_history.push_back(sol.objective);
    if (t * step.norm() < cfg.gn_step_tol * std::max(w.norm(), 1e-30)) break;
  }

  sol.fields = u;
  sol.traces.resize(sys.n_dd());
  for (int i = 0; i < sys.n_dd(); ++i)
    sol.traces[i] =
        w.segment(ws.trace_offset[i], ws.trace_offset[i + 1] - ws.trace_offset[i]);
  return sol;
}

}  // namespace os2

#endif  // OS2_HF_SOLVERS_HPP
