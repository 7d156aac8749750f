#ifndef OS2_ROM_HPP
#define OS2_ROM_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "os2/component.hpp"
#include "os2/neohookean.hpp"

// Online solution machinery: reduced port-to-bubble maps and their
// gradients, assembly of the jump system r(beta) = P F(beta) + Q beta + c,
// and the three solvers compared in the experiments (Gauss-Newton, limited
// memory BFGS, multiplicative overlapping Schwarz). The solvers run against
// an abstract problem so the same code drives the 2d benchmark, the
// full-space consistency checks and the 1d validation problems.

namespace os2 {

struct CoefficientState {
  std::vector<Eigen::VectorXd> alpha, beta;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> objective_history;
  std::vector<Eigen::VectorXd> beta_history;  // stacked iterates, including the start
  double final_objective = 0;
  std::vector<int> local_newton_counts;  // per outer iteration
  double wall_time_s = 0;
  bool damping_engaged = false;
  bool rank_deficient = false;
  std::string termination;
};

struct OnlineSolverConfig {
  double tol = 1e-6;  // relative-step termination
  int maxit = 100;
  bool damping = true;
  int max_halvings = 10;
  double grad_tol = 1e-14;
  double local_tol = 1e-11;
  int local_maxit = 30;
  int lbfgs_memory = 10;
};

// A local reduced model: u = base + Z alpha + W beta on the component's
// deployed mesh, with the component's element weights.
struct LocalRom {
  ComponentModel model;
  std::shared_ptr<const Eigen::MatrixXd> Z, W;
  Eigen::VectorXd weights;  // empty = high-fidelity quadrature
  Eigen::VectorXd base;     // empty = zero lift

  Eigen::VectorXd field(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) const {
    Eigen::VectorXd u = (*Z) * alpha + (*W) * beta;
    if (base.size()) u += base;
    return u;
  }
  void eval(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
            Eigen::VectorXd* rhat, Eigen::MatrixXd* Jaa, Eigen::MatrixXd* Jab) const {
    assemble_reduced(model, field(alpha, beta), weights, *Z, *W, rhat, Jaa, Jab);
  }
};

class LocalMapSingularError : public std::runtime_error {
 public:
  explicit LocalMapSingularError(int comp)
      : std::runtime_error("singular local residual Jacobian in component " +
                           std::to_string(comp)),
        component(comp) {}
  int component;
};

// Newton solve of the reduced local problem R(alpha, beta) = 0.
inline Eigen::VectorXd port_to_bubble(const LocalRom& lm, const Eigen::VectorXd& beta,
                                      const Eigen::VectorXd& alpha_guess,
                                      const OnlineSolverConfig& cfg, int comp = -1,
                                      int* newton_iters = nullptr) {
  Eigen::VectorXd alpha = alpha_guess;
  Eigen::VectorXd r;
  Eigen::MatrixXd Jaa;
  lm.eval(alpha, beta, &r, nullptr, nullptr);
  double rnorm = r.norm();
  if (newton_iters) *newton_iters = 0;
  for (int it = 0; it < cfg.local_maxit; ++it) {
    if (rnorm < cfg.local_tol) return alpha;
    lm.eval(alpha, beta, nullptr, &Jaa, nullptr);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Jaa);
    if (!lu.isInvertible()) throw LocalMapSingularError(comp);
    const Eigen::VectorXd da = lu.solve(-r);
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= 20; ++bt) {
      try {
        Eigen::VectorXd rt;
        lm.eval(alpha + step * da, beta, &rt, nullptr, nullptr);
        const double tn = rt.norm();
        if (tn < rnorm || tn < cfg.local_tol) {
          alpha += step * da;
          r = rt;
          rnorm = tn;
          accepted = true;
          break;
        }
      } catch (const InvertedElementError&) {
      }
      step *= 0.5;
    }
    if (newton_iters) *newton_iters = it + 1;
    if (!accepted)
      throw std::runtime_error("local Newton diverged in component " + std::to_string(comp));
  }
  if (rnorm < cfg.local_tol) return alpha;
  throw std::runtime_error("local Newton did not converge in component " +
                           std::to_string(comp));
}

// dF/dbeta = -(dR/dalpha)^-1 dR/dbeta at a solved local state.
inline Eigen::MatrixXd port_to_bubble_jacobian(const LocalRom& lm, const Eigen::VectorXd& alpha,
                                               const Eigen::VectorXd& beta, int comp = -1) {
  Eigen::MatrixXd Jaa, Jab;
  lm.eval(alpha, beta, nullptr, &Jaa, &Jab);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Jaa);
  if (!lu.isInvertible()) throw LocalMapSingularError(comp);
  return -lu.solve(Jab);
}

// --- abstract jump problem --------------------------------------------------

class JumpProblem {
 public:
  virtual ~JumpProblem() = default;
  virtual int n_comps() const = 0;
  virtual int alpha_dim(int i) const = 0;
  virtual int beta_dim(int i) const = 0;
  virtual Eigen::VectorXd solve_local(int i, const Eigen::VectorXd& beta_i,
                                      const Eigen::VectorXd& alpha_warm,
                                      int* newton_iters) const = 0;
  virtual Eigen::MatrixXd local_jacobian(int i, const Eigen::VectorXd& alpha_i,
                                         const Eigen::VectorXd& beta_i) const = 0;
  virtual Eigen::VectorXd local_jacobian_t_apply(int i, const Eigen::VectorXd& alpha_i,
                                                 const Eigen::VectorXd& beta_i,
                                                 const Eigen::VectorXd& v) const {
    return local_jacobian(i, alpha_i, beta_i).transpose() * v;
  }
  virtual const Eigen::SparseMatrix<double>& P() const = 0;
  virtual const Eigen::SparseMatrix<double>& Q() const = 0;
  virtual const Eigen::VectorXd& c() const = 0;
  // residual rows fed by component i's own port points (Schwarz sweeps)
  virtual const std::vector<int>& port_rows(int i) const = 0;

  int alpha_offset(int i) const {
    int off = 0;
    for (int k = 0; k < i; ++k) off += alpha_dim(k);
    return off;
  }
  int beta_offset(int i) const {
    int off = 0;
    for (int k = 0; k < i; ++k) off += beta_dim(k);
    return off;
  }
  int total_alpha() const { return alpha_offset(n_comps()); }
  int total_beta() const { return beta_offset(n_comps()); }

  Eigen::VectorXd stack_alpha(const CoefficientState& s) const {
    Eigen::VectorXd a(total_alpha());
    for (int i = 0; i < n_comps(); ++i) a.segment(alpha_offset(i), alpha_dim(i)) = s.alpha[i];
    return a;
  }
  Eigen::VectorXd stack_beta(const CoefficientState& s) const {
    Eigen::VectorXd b(total_beta());
    for (int i = 0; i < n_comps(); ++i) b.segment(beta_offset(i), beta_dim(i)) = s.beta[i];
    return b;
  }
  Eigen::VectorXd residual(const CoefficientState& s) const {
    Eigen::VectorXd r = P() * stack_alpha(s) + Q() * stack_beta(s);
    if (c().size()) r += c();
    return r;
  }
  double objective(const CoefficientState& s) const { return 0.5 * residual(s).squaredNorm(); }

  // alpha = F(beta) for all components, warm-started in place
  int update_bubbles(CoefficientState& s, const OnlineSolverConfig& cfg) const {
    int total = 0;
    for (int i = 0; i < n_comps(); ++i) {
      int iters = 0;
      s.alpha[i] = solve_local(i, s.beta[i], s.alpha[i], &iters);
      total += iters;
    }
    return total;
  }
};

// --- concrete problem over local reduced models -----------------------------

class RomJumpProblem : public JumpProblem {
 public:
  std::vector<LocalRom> locals;
  Eigen::SparseMatrix<double> P_, Q_;
  Eigen::VectorXd c_;
  std::vector<std::vector<int>> rows_by_comp;
  struct RowMeta {
    int comp = -1;
    int qpoint = -1;
    double rho = 1.0;  // port weight used in the row scaling
  };
  std::vector<RowMeta> row_meta;
  OnlineSolverConfig local_cfg;

  int n_comps() const override { return static_cast<int>(locals.size()); }
  int alpha_dim(int i) const override { return static_cast<int>(locals[i].Z->cols()); }
  int beta_dim(int i) const override { return static_cast<int>(locals[i].W->cols()); }
  Eigen::VectorXd solve_local(int i, const Eigen::VectorXd& beta_i,
                              const Eigen::VectorXd& alpha_warm,
                              int* newton_iters) const override {
    return port_to_bubble(locals[i], beta_i, alpha_warm, local_cfg, i, newton_iters);
  }
  Eigen::MatrixXd local_jacobian(int i, const Eigen::VectorXd& alpha_i,
                                 const Eigen::VectorXd& beta_i) const override {
    return port_to_bubble_jacobian(locals[i], alpha_i, beta_i, i);
  }
  Eigen::VectorXd local_jacobian_t_apply(int i, const Eigen::VectorXd& alpha_i,
                                         const Eigen::VectorXd& beta_i,
                                         const Eigen::VectorXd& v) const override {
    Eigen::MatrixXd Jaa, Jab;
    locals[i].eval(alpha_i, beta_i, nullptr, &Jaa, &Jab);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Jaa.transpose());
    if (!lu.isInvertible()) throw LocalMapSingularError(i);
    return -Jab.transpose() * lu.solve(v);
  }
  const Eigen::SparseMatrix<double>& P() const override { return P_; }
  const Eigen::SparseMatrix<double>& Q() const override { return Q_; }
  const Eigen::VectorXd& c() const override { return c_; }
  const std::vector<int>& port_rows(int i) const override { return rows_by_comp[i]; }

  // Squared jump density per component port point (the Narson factor is
  // included, the port weight is not): the data hyper-reduction trains on.
  std::vector<Eigen::VectorXd> eta(const CoefficientState& s,
                                   const std::vector<int>& n_points) const {
    const Eigen::VectorXd r = residual(s);
    std::vector<Eigen::VectorXd> out;
    for (int np : n_points) out.push_back(Eigen::VectorXd::Zero(np));
    for (Eigen::Index k = 0; k < r.size(); ++k) {
      const RowMeta& meta = row_meta[static_cast<std::size_t>(k)];
      out[meta.comp][meta.qpoint] += r[k] * r[k] / meta.rho;
    }
    return out;
  }
};

enum class ObjectiveQuad { Hfq, Eq, Eim };

// Assemble the jump system of a deployed system over the archetype bases
// held by `bases` (per archetype). Rows are scaled by sqrt(rho * J_bnd) so
// that half the squared residual norm equals the (hyper-reduced) jump
// functional. Neighbor-side mode values come from mesh interpolation on the
// deployed meshes.
struct RomBases {
  std::shared_ptr<const Eigen::MatrixXd> Z[2], W[2];
};

inline RomBases library_bases(const ComponentLibrary& lib) {
  RomBases b;
  for (int a = 0; a < 2; ++a) {
    const Archetype& arch = lib.arch(a);
    if (arch.Zb.size() == 0 || arch.Wp.size() == 0)
      throw std::runtime_error("archetype bases are not trained");
    b.Z[a] = std::make_shared<Eigen::MatrixXd>(arch.Zb);
    b.W[a] = std::make_shared<Eigen::MatrixXd>(arch.Wp);
  }
  return b;
}

inline RomJumpProblem build_rom_problem(const DeployedSystem& sys, const RomBases& bases,
                                        bool local_eq, ObjectiveQuad obj,
                                        const OnlineSolverConfig& cfg = {}) {
  RomJumpProblem jp;
  jp.local_cfg = cfg;
  const int ndd = sys.n_dd();
  for (int i = 0; i < ndd; ++i) {
    LocalRom lm;
    lm.model = component_model(sys, i);
    lm.Z = bases.Z[sys.comps[i].arch];
    lm.W = bases.W[sys.comps[i].arch];
    if (local_eq) {
      const Eigen::VectorXd& rho = sys.arch_of(i).rho_eq;
      if (rho.size() == 0)
        throw std::runtime_error("element empirical-quadrature weights are not built");
      lm.weights = rho;
    }
    jp.locals.push_back(std::move(lm));
  }

  // row construction
  jp.rows_by_comp.assign(ndd, {});
  std::vector<Eigen::Triplet<double>> tp, tq;
  int row = 0;
  Eigen::VectorXd Nsh;
  for (int i = 0; i < ndd; ++i) {
    const Archetype& arch_i = sys.arch_of(i);
    const Eigen::MatrixXd& Wi = *jp.locals[i].W;
    const Mesh& mesh_i = sys.comps[i].mesh;
    std::vector<std::uint8_t> selected;
    if (obj == ObjectiveQuad::Eim) {
      if (arch_i.eim_points.empty())
        throw std::runtime_error("interpolation points are not built");
      selected.assign(sys.ports[i].size(), 0);
      for (int q : arch_i.eim_points) selected[q] = 1;
    }
    for (int q = 0; q < static_cast<int>(sys.ports[i].size()); ++q) {
      const PortPointInfo& pp = sys.ports[i][q];
      double rho = 0;
      switch (obj) {
        case ObjectiveQuad::Hfq: rho = pp.rho_hf; break;
        case ObjectiveQuad::Eq:
          if (arch_i.rho_p_eq.size() == 0)
            throw std::runtime_error("port empirical-quadrature weights are not built");
          rho = arch_i.rho_p_eq[q];
          break;
        case ObjectiveQuad::Eim: rho = selected[q] ? 1.0 : 0.0; break;
      }
      if (rho <= 0.0) continue;
      const double f = std::sqrt(rho * pp.jbnd);
      // own-side trace values of the port modes at the reference point
      const Located own{arch_i.port_qp[q].facet.elem, arch_i.port_qp[q].xi};
      shape2d(mesh_i.degree, own.xi, Nsh);
      Eigen::MatrixXd Wown = Eigen::MatrixXd::Zero(2, Wi.cols());
      for (int l = 0; l < mesh_i.n_lp(); ++l)
        for (int d = 0; d < 2; ++d)
          Wown.row(d) += Nsh[l] * Wi.row(mesh_i.conn(own.elem, l) * 2 + d);
      for (const PortOwner& o : pp.owners) {
        const Mesh& mesh_j = sys.comps[o.j].mesh;
        const Eigen::MatrixXd& Zj = *jp.locals[o.j].Z;
        const Eigen::MatrixXd& Wj = *jp.locals[o.j].W;
        shape2d(mesh_j.degree, o.loc.xi, Nsh);
        for (int d = 0; d < 2; ++d) {
          for (Eigen::Index cc = 0; cc < Wi.cols(); ++cc)
            tq.emplace_back(row, jp.beta_offset(i) + static_cast<int>(cc),
                            f * Wown(d, cc));
          for (int l = 0; l < mesh_j.n_lp(); ++l) {
            const int node = mesh_j.conn(o.loc.elem, l);
            const double nl = Nsh[l];
            for (Eigen::Index cc = 0; cc < Zj.cols(); ++cc)
              tp.emplace_back(row, jp.alpha_offset(o.j) + static_cast<int>(cc),
                              -f * nl * Zj(node * 2 + d, cc));
            for (Eigen::Index cc = 0; cc < Wj.cols(); ++cc)
              tq.emplace_back(row, jp.beta_offset(o.j) + static_cast<int>(cc),
                              -f * nl * Wj(node * 2 + d, cc));
          }
          jp.rows_by_comp[i].push_back(row);
          jp.row_meta.push_back({i, q, rho});
          ++row;
        }
      }
    }
  }
  jp.P_.resize(row, jp.total_alpha());
  jp.P_.setFromTriplets(tp.begin(), tp.end());
  jp.Q_.resize(row, jp.total_beta());
  jp.Q_.setFromTriplets(tq.begin(), tq.end());
  jp.c_ = Eigen::VectorXd();
  return jp;
}

// Sample-mean initial condition held by the trained archetypes.
inline CoefficientState mean_initial_state(const DeployedSystem& sys) {
  CoefficientState s;
  for (int i = 0; i < sys.n_dd(); ++i) {
    const Archetype& arch = sys.arch_of(i);
    if (arch.alpha_mean.size() == 0)
      throw std::runtime_error("coefficient sample means are not trained");
    s.alpha.push_back(arch.alpha_mean);
    s.beta.push_back(arch.beta_mean);
  }
  return s;
}

inline CoefficientState zero_state(const JumpProblem& jp) {
  CoefficientState s;
  for (int i = 0; i < jp.n_comps(); ++i) {
    s.alpha.push_back(Eigen::VectorXd::Zero(jp.alpha_dim(i)));
    s.beta.push_back(Eigen::VectorXd::Zero(jp.beta_dim(i)));
  }
  return s;
}

namespace detail {

struct StepSolve {
  Eigen::VectorXd step;
  bool rank_deficient = false;
};

inline StepSolve least_squares_step(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  StepSolve out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() == A.cols()) {
    out.step = qr.solve(b);
    return out;
  }
  out.rank_deficient = true;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  out.step = svd.solve(b);
  return out;
}

inline void unstack_beta(const JumpProblem& jp, const Eigen::VectorXd& b,
                         CoefficientState& s) {
  for (int i = 0; i < jp.n_comps(); ++i)
    s.beta[i] = b.segment(jp.beta_offset(i), jp.beta_dim(i));
}

}  // namespace detail

// Gauss-Newton over the port coefficients: local solves, block-diagonal map
// Jacobian, pseudo-inverse step, optional objective backtracking.
inline std::pair<CoefficientState, SolveReport> solve_gauss_newton(
    const JumpProblem& jp, const CoefficientState& init, const OnlineSolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  CoefficientState s = init;
  SolveReport rep;
  int locals = jp.update_bubbles(s, cfg);
  Eigen::VectorXd r = jp.residual(s);
  double f = 0.5 * r.squaredNorm();
  rep.objective_history.push_back(f);
  rep.beta_history.push_back(jp.stack_beta(s));
  rep.termination = "maxit";

  for (int it = 0; it < cfg.maxit; ++it) {
    Eigen::MatrixXd Jr = Eigen::MatrixXd(jp.Q());
    for (int i = 0; i < jp.n_comps(); ++i) {
      const Eigen::MatrixXd JF = jp.local_jacobian(i, s.alpha[i], s.beta[i]);
      Jr.middleCols(jp.beta_offset(i), jp.beta_dim(i)) +=
          jp.P().middleCols(jp.alpha_offset(i), jp.alpha_dim(i)) * JF;
    }
    const auto ss = detail::least_squares_step(Jr, r);
    rep.rank_deficient |= ss.rank_deficient;

    const Eigen::VectorXd beta_old = jp.stack_beta(s);
    double t = 1.0;
    CoefficientState trial = s;
    double f_trial = 0;
    bool accepted = false;
    for (int h = 0; h <= (cfg.damping ? cfg.max_halvings : 0); ++h) {
      detail::unstack_beta(jp, beta_old - t * ss.step, trial);
      try {
        locals += jp.update_bubbles(trial, cfg);
        f_trial = jp.objective(trial);
        if (!cfg.damping || f_trial <= f || f_trial < 1e-28) {
          accepted = true;
          break;
        }
      } catch (const std::runtime_error&) {
        if (!cfg.damping) throw;
      }
      rep.damping_engaged = true;
      t *= 0.5;
    }
    rep.local_newton_counts.push_back(locals);
    locals = 0;
    if (!accepted) {
      rep.termination = "stalled";
      break;
    }
    s = trial;
    f = f_trial;
    r = jp.residual(s);
    rep.iterations = it + 1;
    rep.objective_history.push_back(f);
    rep.beta_history.push_back(jp.stack_beta(s));
    if (t * ss.step.norm() < cfg.tol * std::max(beta_old.norm(), 1e-300)) {
      rep.termination = "step-tol";
      break;
    }
  }
  jp.update_bubbles(s, cfg);
  rep.final_objective = jp.objective(s);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {s, rep};
}

namespace detail {

// gradient of the objective without forming the map Jacobians
inline Eigen::VectorXd jump_gradient(const JumpProblem& jp, const CoefficientState& s,
                                     const Eigen::VectorXd& r) {
  Eigen::VectorXd g = jp.Q().transpose() * r;
  const Eigen::VectorXd pr = jp.P().transpose() * r;
  for (int i = 0; i < jp.n_comps(); ++i)
    g.segment(jp.beta_offset(i), jp.beta_dim(i)) += jp.local_jacobian_t_apply(
        i, s.alpha[i], s.beta[i], pr.segment(jp.alpha_offset(i), jp.alpha_dim(i)));
  return g;
}

}  // namespace detail

// Limited-memory BFGS with a Wolfe-style interpolating line search; evaluating
// the objective at a trial point re-solves the local problems.
inline std::pair<CoefficientState, SolveReport> solve_quasi_newton(
    const JumpProblem& jp, const CoefficientState& init, const OnlineSolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  CoefficientState s = init;
  SolveReport rep;
  int locals = jp.update_bubbles(s, cfg);
  Eigen::VectorXd beta = jp.stack_beta(s);
  Eigen::VectorXd r = jp.residual(s);
  double f = 0.5 * r.squaredNorm();
  Eigen::VectorXd g = detail::jump_gradient(jp, s, r);
  rep.objective_history.push_back(f);
  rep.beta_history.push_back(beta);
  rep.termination = "maxit";

  if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
    rep.termination = "gradient-tol";
    rep.final_objective = f;
    rep.local_newton_counts.push_back(locals);
    rep.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {s, rep};
  }

  std::vector<Eigen::VectorXd> S, Y;
  for (int it = 0; it < cfg.maxit; ++it) {
    // two-loop recursion
    Eigen::VectorXd q = g;
    const int mstore = static_cast<int>(S.size());
    std::vector<double> a(mstore);
    for (int k = mstore - 1; k >= 0; --k) {
      const double rhok = 1.0 / Y[k].dot(S[k]);
      a[k] = rhok * S[k].dot(q);
      q -= a[k] * Y[k];
    }
    if (mstore) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (int k = 0; k < mstore; ++k) {
      const double rhok = 1.0 / Y[k].dot(S[k]);
      const double bk = rhok * Y[k].dot(q);
      q += (a[k] - bk) * S[k];
    }
    Eigen::VectorXd d = -q;
    double gd = g.dot(d);
    if (gd >= 0) {  // safeguard: fall back to steepest descent
      d = -g;
      gd = g.dot(d);
    }

    // line search with quadratic interpolation (exact on quadratics)
    const double c1 = 1e-4, c2 = 0.9;
    double t = 1.0;
    CoefficientState trial = s;
    double f_t = 0;
    Eigen::VectorXd g_t;
    bool ok = false;
    for (int ls = 0; ls < 25; ++ls) {
      detail::unstack_beta(jp, beta + t * d, trial);
      bool feasible = true;
      try {
        locals += jp.update_bubbles(trial, cfg);
      } catch (const std::runtime_error&) {
        feasible = false;
      }
      if (feasible) {
        const Eigen::VectorXd rt = jp.residual(trial);
        f_t = 0.5 * rt.squaredNorm();
        if (f_t <= f + c1 * t * gd) {
          g_t = detail::jump_gradient(jp, trial, rt);
          if (std::abs(g_t.dot(d)) <= c2 * std::abs(gd) || ls == 24) {
            ok = true;
            break;
          }
          t *= 2.0;  // curvature not yet satisfied: lengthen
          continue;
        }
      }
      // quadratic interpolation from f(0), f'(0), f(t)
      if (feasible) {
        const double denom = 2.0 * (f_t - f - gd * t);
        double tq = denom > 0 ? -gd * t * t / denom : 0.5 * t;
        if (!(tq > 1e-4 * t && tq < 0.9 * t)) tq = 0.5 * t;
        t = tq;
      } else {
        t *= 0.25;
      }
    }
    rep.local_newton_counts.push_back(locals);
    locals = 0;
    if (!ok) {
      rep.termination = "line-search-failure";
      break;
    }
    const Eigen::VectorXd beta_new = beta + t * d;
    const Eigen::VectorXd sk = beta_new - beta;
    const Eigen::VectorXd yk = g_t - g;
    if (sk.dot(yk) > 1e-12 * sk.norm() * yk.norm()) {
      S.push_back(sk);
      Y.push_back(yk);
      if (static_cast<int>(S.size()) > cfg.lbfgs_memory) {
        S.erase(S.begin());
        Y.erase(Y.begin());
      }
    }
    beta = beta_new;
    detail::unstack_beta(jp, beta, s);
    jp.update_bubbles(s, cfg);
    f = f_t;
    g = g_t;
    rep.iterations = it + 1;
    rep.objective_history.push_back(f);
    rep.beta_history.push_back(beta);
    if (sk.norm() < cfg.tol * std::max(beta.norm(), 1e-300)) {
      rep.termination = "step-tol";
      break;
    }
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      rep.termination = "gradient-tol";
      break;
    }
  }
  rep.final_objective = jp.objective(s);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {s, rep};
}

// Multiplicative overlapping Schwarz: sweep the components in index order,
// each update solving the small least-squares problem over its own port
// coefficients with the neighbors frozen.
inline std::pair<CoefficientState, SolveReport> solve_schwarz(const JumpProblem& jp,
                                                              const CoefficientState& init,
                                                              const OnlineSolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  CoefficientState s = init;
  SolveReport rep;
  rep.objective_history.push_back(jp.objective(s));
  rep.beta_history.push_back(jp.stack_beta(s));
  rep.termination = "maxit";
  int locals = 0;

  for (int it = 0; it < cfg.maxit; ++it) {
    const Eigen::VectorXd beta_prev = jp.stack_beta(s);
    for (int i = 0; i < jp.n_comps(); ++i) {
      const std::vector<int>& rows = jp.port_rows(i);
      if (rows.empty()) continue;
      const Eigen::VectorXd r = jp.residual(s);
      Eigen::MatrixXd A(rows.size(), jp.beta_dim(i));
      Eigen::VectorXd rhs(rows.size());
      const Eigen::MatrixXd Qi =
          Eigen::MatrixXd(jp.Q().middleCols(jp.beta_offset(i), jp.beta_dim(i)));
      for (std::size_t k = 0; k < rows.size(); ++k) {
        A.row(static_cast<Eigen::Index>(k)) = Qi.row(rows[k]);
        rhs[static_cast<Eigen::Index>(k)] = r[rows[k]];
      }
      const auto ss = detail::least_squares_step(A, rhs);
      rep.rank_deficient |= ss.rank_deficient;
      s.beta[i] -= ss.step;
      int iters = 0;
      s.alpha[i] = jp.solve_local(i, s.beta[i], s.alpha[i], &iters);
      locals += iters;
    }
    rep.local_newton_counts.push_back(locals);
    locals = 0;
    rep.iterations = it + 1;
    rep.objective_history.push_back(jp.objective(s));
    const Eigen::VectorXd beta_now = jp.stack_beta(s);
    rep.beta_history.push_back(beta_now);
    if ((beta_now - beta_prev).norm() < cfg.tol * std::max(beta_now.norm(), 1e-300)) {
      rep.termination = "step-tol";
      break;
    }
  }
  rep.final_objective = jp.objective(s);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {s, rep};
}

}  // namespace os2

#endif  // OS2_ROM_HPP
