#ifndef OS2_VALIDATION_1D_HPP
#define OS2_VALIDATION_1D_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "os2/hf_solvers.hpp"
#include "os2/neohookean.hpp"
#include "os2/rom.hpp"

// Closed-form machinery for the two 1d model problems on (-1,1) with the
// overlapping partition (-1,delta), (-delta,1): local solutions, the 2x2
// coupled port system, the alternating-Schwarz and optimal-step gradient
// descent transition matrices, their spectral radii, and a discrete FE
// cross-check that drives the generic solvers with full local spaces.

namespace os2 {

enum class OneDimKind { Poisson, AdvDiff };

struct OneDimProblem {
  OneDimKind kind = OneDimKind::Poisson;
  double gamma = 1.0;  // advection strength (AdvDiff only)
  double delta = 0.1;  // half overlap

  void validate() const {
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("delta must be in (0,1)");
    if (kind == OneDimKind::AdvDiff && gamma <= 0.0)
      throw std::invalid_argument("gamma must be positive");
  }
};

// Exact local solutions as functions of the port value beta.
// Poisson: u'' = 2 with u(-1) = u(1) = 1 (exact solution x^2).
// AdvDiff: -u'' + gamma u' = 0 with u(-1) = 0, u(1) = 1.
struct OneDimLocalSolutions {
  std::function<double(double, double)> u1, u2;  // (x, beta)
};

inline OneDimLocalSolutions local_solutions(const OneDimProblem& p) {
  p.validate();
  OneDimLocalSolutions ls;
  const double d = p.delta;
  if (p.kind == OneDimKind::Poisson) {
    ls.u1 = [d](double x, double beta) {
      return x * x - d * d * (1.0 + x) / (1.0 + d) + beta * (1.0 + x) / (1.0 + d);
    };
    ls.u2 = [d](double x, double beta) {
      return x * x - d * d * (1.0 - x) / (1.0 + d) + beta * (1.0 - x) / (1.0 + d);
    };
  } else {
    const double g = p.gamma;
    ls.u1 = [d, g](double x, double beta) {
      return beta * (std::exp(g * x) - std::exp(-g)) / (std::exp(g * d) - std::exp(-g));
    };
    ls.u2 = [d, g](double x, double beta) {
      const double den = std::exp(g) - std::exp(-g * d);
      return (std::exp(g * x) - std::exp(-g * d)) / den +
             beta * (std::exp(g) - std::exp(g * x)) / den;
    };
  }
  return ls;
}

// The coupled 2x2 port system A beta = F (one-shot statement), the
// Gauss-Seidel transition pair (P_os, F_os) of alternating Schwarz, and the
// optimal gradient-descent step for the one-shot least squares.
struct OneDimIterationSystem {
  Eigen::Matrix2d A;
  Eigen::Vector2d F;
  Eigen::Matrix2d P_os;
  Eigen::Vector2d F_os;
  double sigma = 0;      // optimal step 2 / (lambda_min + lambda_max) of A^T A
  double lambda_min = 0, lambda_max = 0;

  Eigen::Vector2d fixed_point() const { return A.fullPivLu().solve(F); }
};

inline OneDimIterationSystem build_system(const OneDimProblem& p) {
  p.validate();
  OneDimIterationSystem out;
  double a12, a21, f1, f2;
  if (p.kind == OneDimKind::Poisson) {
    const double c = (1.0 - p.delta) / (1.0 + p.delta);
    const double d = 2.0 * std::pow(p.delta, 3) / (1.0 + p.delta);
    a12 = c;
    a21 = c;
    f1 = d;
    f2 = d;
  } else {
    const double g = p.gamma, d = p.delta;
    a12 = (std::exp(g) - std::exp(g * d)) / (std::exp(g) - std::exp(-g * d));
    a21 = (std::exp(-g * d) - std::exp(-g)) / (std::exp(g * d) - std::exp(-g));
    f1 = (std::exp(g * d) - std::exp(-g * d)) / (std::exp(g) - std::exp(-g * d));
    f2 = 0.0;
  }
  out.A << 1.0, -a12, -a21, 1.0;
  out.F << f1, f2;
  // Gauss-Seidel: beta1 from old beta2, then beta2 from new beta1
  out.P_os << 0.0, a12, 0.0, a12 * a21;
  out.F_os << f1, f2 + a21 * f1;
  // eigenvalues of A^T A (2x2 closed form)
  const Eigen::Matrix2d AtA = out.A.transpose() * out.A;
  const double tr = AtA.trace(), det = AtA.determinant();
  const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  out.lambda_min = 0.5 * (tr - disc);
  out.lambda_max = 0.5 * (tr + disc);
  out.sigma = 2.0 / (out.lambda_min + out.lambda_max);
  return out;
}

struct OneDimRates {
  double rho_os = 0, rho_os2 = 0, cond = 0, alpha_p = 0, gamma_p = 0;
  double rho_os_asym = 0, rho_os2_asym = 0, cond_asym = 0, alpha_p_asym = 0,
         gamma_p_asym = 0;
};

// Exact spectral radii of the transition matrices together with the small
// overlap asymptotes quoted for them.
inline OneDimRates spectral_rates(const OneDimProblem& p) {
  const OneDimIterationSystem sys = build_system(p);
  OneDimRates r;
  Eigen::EigenSolver<Eigen::Matrix2d> eig(sys.P_os);
  r.rho_os = eig.eigenvalues().cwiseAbs().maxCoeff();
  // optimally stepped gradient descent: I - sigma A^T A
  r.rho_os2 = (sys.lambda_max - sys.lambda_min) / (sys.lambda_max + sys.lambda_min);
  r.alpha_p = std::sqrt(sys.lambda_min);
  r.gamma_p = std::sqrt(sys.lambda_max);
  r.cond = r.gamma_p / r.alpha_p;

  const double d = p.delta;
  if (p.kind == OneDimKind::Poisson) {
    r.rho_os_asym = 1.0 - 4.0 * d;
    r.rho_os2_asym = 1.0 - 4.0 * d * d;
    r.cond_asym = 1.0 / d;
    r.alpha_p_asym = 2.0 * d / (1.0 + d);
    r.gamma_p_asym = 2.0 / (1.0 + d);
  } else {
    const double g = p.gamma, eg = std::exp(p.gamma);
    r.rho_os_asym = 1.0 - 2.0 * (eg + 1.0) / (eg - 1.0) * g * d;
    r.rho_os2_asym = 1.0 - (eg + 2.0) / (8.0 * (eg - 1.0)) * g * g * d * d;
    r.cond_asym = (eg - 1.0) / ((eg + 2.0) * g * d);
    r.alpha_p_asym = 2.0 * (eg + 2.0) * g * d / (eg - 1.0);
    r.gamma_p_asym = 2.0;
  }
  return r;
}

// --- discrete cross-check ----------------------------------------------------

// Two overlapping 1d components with full (unreduced) local spaces: alpha
// holds the interior dof values, beta the single port value. Local solves and
// map gradients go through the sparse FE operators, the residual rows through
// the same P/Q structure the 2d problems use.
class OneDimJumpProblem : public JumpProblem {
 public:
  struct Side {
    std::shared_ptr<Mesh> mesh;
    std::shared_ptr<FeSpace> space;
    ComponentModel model;
    int dir_node = -1, port_node = -1;
    double dir_value = 0;
    std::vector<int> interior;       // dofs, in order = alpha layout
    std::vector<int> slot;           // dof -> interior slot or -1
    Eigen::SparseMatrix<double> K;   // constant (linear kernels)
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;  // of K_ii
    Eigen::VectorXd rhs_const;       // residual at u=0 restricted to interior
    Eigen::VectorXd k_port;          // K(interior, port) column
  };
  Side side[2];
  Eigen::SparseMatrix<double> P_, Q_;
  Eigen::VectorXd c_;
  std::vector<std::vector<int>> rows_by_comp;

  OneDimJumpProblem(const OneDimProblem& p, int elems_per_unit) {
    p.validate();
    build_side(p, 0, elems_per_unit);
    build_side(p, 1, elems_per_unit);
    build_rows(p);
  }

  int n_comps() const override { return 2; }
  int alpha_dim(int i) const override { return static_cast<int>(side[i].interior.size()); }
  int beta_dim(int) const override { return 1; }

  Eigen::VectorXd solve_local(int i, const Eigen::VectorXd& beta_i, const Eigen::VectorXd&,
                              int* newton_iters) const override {
    // linear problem: one factorized solve
    const Side& sd = side[i];
    Eigen::VectorXd rhs = -sd.rhs_const - beta_i[0] * sd.k_port;
    if (newton_iters) *newton_iters = 1;
    return sd.lu->solve(rhs);
  }

  Eigen::MatrixXd local_jacobian(int i, const Eigen::VectorXd&,
                                 const Eigen::VectorXd&) const override {
    return -side[i].lu->solve(side[i].k_port);
  }

  const Eigen::SparseMatrix<double>& P() const override { return P_; }
  const Eigen::SparseMatrix<double>& Q() const override { return Q_; }
  const Eigen::VectorXd& c() const override { return c_; }
  const std::vector<int>& port_rows(int i) const override { return rows_by_comp[i]; }

  // full dof vector of one side from its coefficients
  Eigen::VectorXd field(int i, const Eigen::VectorXd& alpha, double beta) const {
    const Side& sd = side[i];
    Eigen::VectorXd u = Eigen::VectorXd::Zero(sd.space->n_dofs());
    u[sd.dir_node] = sd.dir_value;
    u[sd.port_node] = beta;
    for (std::size_t k = 0; k < sd.interior.size(); ++k)
      u[sd.interior[k]] = alpha[static_cast<Eigen::Index>(k)];
    return u;
  }

 private:
  void build_side(const OneDimProblem& p, int i, int elems_per_unit) {
    Side& sd = side[i];
    const double a = i == 0 ? -1.0 : -p.delta;
    const double b = i == 0 ? p.delta : 1.0;
    const int ne = std::max(2, static_cast<int>(std::round((b - a) * elems_per_unit / 2.0)));
    std::vector<double> knots(ne + 1);
    for (int k = 0; k <= ne; ++k) knots[k] = a + (b - a) * k / ne;
    sd.mesh = std::make_shared<Mesh>(Mesh::line1d(knots, 2));
    sd.space = std::make_shared<FeSpace>(*sd.mesh, 1);
    sd.model.mesh = sd.mesh.get();
    sd.model.space = sd.space.get();
    if (p.kind == OneDimKind::Poisson) {
      sd.model.kind = PdeKind::Poisson1d;
      sd.model.source = 2.0;
      sd.dir_value = 1.0;
    } else {
      sd.model.kind = PdeKind::AdvDiff1d;
      sd.model.gamma = p.gamma;
      sd.dir_value = i == 0 ? 0.0 : 1.0;
    }
    const int N = sd.space->n_dofs();
    sd.dir_node = i == 0 ? 0 : N - 1;
    sd.port_node = i == 0 ? N - 1 : 0;
    sd.slot.assign(N, -1);
    for (int k = 0; k < N; ++k)
      if (k != sd.dir_node && k != sd.port_node) {
        sd.slot[k] = static_cast<int>(sd.interior.size());
        sd.interior.push_back(k);
      }
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(N);
    sd.K = assemble_jacobian(sd.model, zero);
    // interior block factorization
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < sd.K.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sd.K, k); it; ++it) {
        const int r = sd.slot[it.row()], c = sd.slot[it.col()];
        if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
      }
    Eigen::SparseMatrix<double> Kii(alpha_dim(i), alpha_dim(i));
    Kii.setFromTriplets(trips.begin(), trips.end());
    sd.lu = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    sd.lu->compute(Kii);
    if (sd.lu->info() != Eigen::Success)
      throw std::runtime_error("1d interior factorization failed");
    // residual at the pure Dirichlet lift (covers the source term)
    Eigen::VectorXd lift = zero;
    lift[sd.dir_node] = sd.dir_value;
    const Eigen::VectorXd R0 = assemble_residual(sd.model, lift);
    sd.rhs_const.resize(alpha_dim(i));
    for (std::size_t k = 0; k < sd.interior.size(); ++k)
      sd.rhs_const[static_cast<Eigen::Index>(k)] = R0[sd.interior[k]];
    sd.k_port.resize(alpha_dim(i));
    sd.k_port.setZero();
    for (Eigen::SparseMatrix<double>::InnerIterator it(sd.K, sd.port_node); it; ++it)
      if (sd.slot[it.row()] >= 0) sd.k_port[sd.slot[it.row()]] = it.value();
  }

  void build_rows(const OneDimProblem& p) {
    // two rows: the jump at x = +delta (port of side 0) and at x = -delta
    // (port of side 1); the neighbor field is interpolated on its mesh
    std::vector<Eigen::Triplet<double>> tp, tq;
    c_ = Eigen::VectorXd::Zero(2);
    rows_by_comp.assign(2, {});
    for (int row = 0; row < 2; ++row) {
      const int i = row;        // own side
      const int j = 1 - row;    // neighbor
      const Side& so = side[i];
      const Side& sn = side[j];
      const double x = i == 0 ? p.delta : -p.delta;
      tq.emplace_back(row, i, 1.0);  // own trace value is beta_i
      const Located loc = sn.mesh->locate({x, 0.0});
      Eigen::VectorXd N;
      shape1d(sn.mesh->degree, loc.xi[0], N);
      for (int l = 0; l < sn.mesh->n_lp(); ++l) {
        const int node = sn.mesh->conn(loc.elem, l);
        if (node == sn.port_node)
          tq.emplace_back(row, j, -N[l]);
        else if (node == sn.dir_node)
          c_[row] -= N[l] * sn.dir_value;
        else
          tp.emplace_back(row, alpha_offset(j) + sn.slot[node], -N[l]);
      }
      rows_by_comp[i].push_back(row);
    }
    P_.resize(2, total_alpha());
    P_.setFromTriplets(tp.begin(), tp.end());
    Q_.resize(2, 2);
    Q_.setFromTriplets(tq.begin(), tq.end());
  }
};

// Geometric-mean contraction factor of the error norms over a window of the
// iterate history (transients skipped).
inline double measured_contraction(const std::vector<Eigen::VectorXd>& history,
                                   const Eigen::VectorXd& fixed_point, int first = 5,
                                   int last = 25) {
  const int hi = std::min<int>(last, static_cast<int>(history.size()) - 1);
  if (hi <= first) throw std::invalid_argument("history too short for the fit window");
  double log_acc = 0;
  int count = 0;
  for (int k = first; k < hi; ++k) {
    const double e0 = (history[k] - fixed_point).norm();
    const double e1 = (history[k + 1] - fixed_point).norm();
    if (e0 <= 1e-15 * fixed_point.norm() || e1 <= 0) break;
    log_acc += std::log(e1 / e0);
    ++count;
  }
  if (count == 0) throw std::runtime_error("contraction fit hit the noise floor");
  return std::exp(log_acc / count);
}

struct OneDimCrossCheck {
  double measured_os_contraction = 0;
  Eigen::Vector2d beta_os;
  Eigen::Vector2d beta_gn;
  int gn_iterations = 0;
  double gn_objective = 0;
};

// Discretize both subdomains, run the generic Schwarz and Gauss-Newton
// pipelines with full local spaces, and report the measured contraction and
// converged traces for comparison against the closed forms.
inline OneDimCrossCheck cross_check_discrete(const OneDimProblem& p, int elems_per_unit,
                                             int os_sweeps = 30) {
  OneDimJumpProblem jp(p, elems_per_unit);
  OnlineSolverConfig cfg;
  cfg.tol = 0.0;  // fixed sweep count for the contraction fit
  cfg.maxit = os_sweeps;
  CoefficientState init = zero_state(jp);
  auto [s_os, rep_os] = solve_schwarz(jp, init, cfg);

  OnlineSolverConfig gn_cfg;
  gn_cfg.tol = 1e-12;
  gn_cfg.maxit = 20;
  auto [s_gn, rep_gn] = solve_gauss_newton(jp, init, gn_cfg);

  OneDimCrossCheck out;
  out.beta_os = Eigen::Vector2d(s_os.beta[0][0], s_os.beta[1][0]);
  out.beta_gn = Eigen::Vector2d(s_gn.beta[0][0], s_gn.beta[1][0]);
  out.gn_iterations = rep_gn.iterations;
  out.gn_objective = rep_gn.final_objective;
  const Eigen::VectorXd fp = rep_gn.beta_history.back();
  out.measured_os_contraction = measured_contraction(rep_os.beta_history, fp);
  return out;
}

}  // namespace os2

#endif  // OS2_VALIDATION_1D_HPP
