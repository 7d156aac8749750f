#ifndef OS2_NEOHOOKEAN_HPP
#define OS2_NEOHOOKEAN_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "os2/fe_space.hpp"
#include "os2/mesh.hpp"

// Plane-stress neo-Hookean constitutive law, elemental residual/tangent
// kernels for degree-1/2 quads, traction terms, and the 1d linear kernels
// used by the validation problems. Assembly accepts a per-element weight
// vector; all-ones reproduces the plain FE residual and sparse weights give
// the hyper-reduced one.

namespace os2 {

class InvertedElementError : public std::runtime_error {
 public:
  explicit InvertedElementError(int elem)
      : std::runtime_error("inverted element " + std::to_string(elem) +
                           " (det F <= 0)"),
        element(elem) {}
  int element;
};

struct Material {
  double E = 1.0;
  double nu = 0.3;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  static Material plane_stress(double E, double nu) {
    Material m;
    m.E = E;
    m.nu = nu;
    m.lambda1 = E * nu / (1.0 - nu * nu);
    m.lambda2 = E / (2.0 * (1.0 + nu));
    return m;
  }
};

// P = lambda2 (F - F^-T) + lambda1 log(det F) F^-T. The log is evaluated as
// log1p(tr G + det G) with G = F - I, which stays accurate near the
// undeformed state.
inline Eigen::Matrix2d first_piola(const Eigen::Matrix2d& F, const Material& m,
                                   int elem = -1) {
  const Eigen::Matrix2d G = F - Eigen::Matrix2d::Identity();
  const double jm1 = G.trace() + G.determinant();
  if (1.0 + jm1 <= 0.0) throw InvertedElementError(elem);
  const double logJ = std::log1p(jm1);
  Eigen::Matrix2d Binv;  // F^-T
  const double detF = 1.0 + jm1;
  Binv << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
  Binv /= detF;
  return m.lambda2 * (F - Binv) + m.lambda1 * logJ * Binv;
}

// Directional derivative dP[dF] at F.
inline Eigen::Matrix2d piola_tangent_apply(const Eigen::Matrix2d& F,
                                           const Eigen::Matrix2d& dF, const Material& m) {
  const Eigen::Matrix2d G = F - Eigen::Matrix2d::Identity();
  const double jm1 = G.trace() + G.determinant();
  const double detF = 1.0 + jm1;
  const double logJ = std::log1p(jm1);
  Eigen::Matrix2d Binv;
  Binv << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
  Binv /= detF;
  const double c2 = m.lambda2 - m.lambda1 * logJ;
  const double trFinvdF = Binv.cwiseProduct(dF).sum();
  return m.lambda2 * dF + c2 * (Binv * dF.transpose() * Binv) +
         m.lambda1 * trFinvdF * Binv;
}

// Small-strain law used by tests and 1-step oracles.
inline Eigen::Matrix2d linear_stress(const Eigen::Matrix2d& gradu, const Material& m) {
  const Eigen::Matrix2d eps = 0.5 * (gradu + gradu.transpose());
  return m.lambda1 * eps.trace() * Eigen::Matrix2d::Identity() + 2.0 * m.lambda2 * eps;
}

struct LoadSpec {
  double s = 0.0;        // downward traction magnitude on the "neumann-r" regions
  double g_scale = 1.0;  // scales the fixed top traction (0, -4 x (1-x))
};

enum class PdeKind { NeoHookean, LinearElastic, Poisson1d, AdvDiff1d };

struct ComponentModel {
  const Mesh* mesh = nullptr;
  const FeSpace* space = nullptr;
  PdeKind kind = PdeKind::NeoHookean;
  std::vector<Material> mat;  // per element (2d laws)
  LoadSpec load;
  double gamma = 0.0;   // 1d advection strength
  double source = 0.0;  // 1d source: residual contribution + source * phi
};

namespace detail {

inline void check_weights(const Eigen::VectorXd& w, int n_elems) {
  if (w.size() == 0) return;
  if (w.size() != n_elems) throw std::invalid_argument("weight vector length mismatch");
  for (int e = 0; e < n_elems; ++e)
    if (w[e] < 0.0)
      throw std::invalid_argument("negative quadrature weight on element " +
                                  std::to_string(e));
}

// Volume residual and (optionally) tangent of one 2d element.
inline void elem_kernel_2d(const ComponentModel& model, int e, const Eigen::VectorXd& ue,
                           Eigen::VectorXd& Re, Eigen::MatrixXd* Ke) {
  const Mesh& mesh = *model.mesh;
  const int p = mesh.degree, nlp = mesh.n_lp();
  const Material& mat = model.mat[e];
  const GaussRule g = gauss_rule(p + 1);
  Re.setZero(nlp * 2);
  if (Ke) Ke->setZero(nlp * 2, nlp * 2);
  Eigen::VectorXd N;
  Eigen::MatrixXd dN;
  for (std::size_t qy = 0; qy < g.pts.size(); ++qy)
    for (std::size_t qx = 0; qx < g.pts.size(); ++qx) {
      const Eigen::Vector2d xi(g.pts[qx], g.pts[qy]);
      shape2d_grad(p, xi, dN);
      Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
      for (int l = 0; l < nlp; ++l)
        J += mesh.nodes.row(mesh.conn(e, l)).transpose() * dN.row(l);
      const double detJ = J.determinant();
      if (detJ <= 0.0) throw InvertedElementError(e);
      const double w = g.wts[qx] * g.wts[qy] * detJ;
      const Eigen::MatrixXd dNx = dN * J.inverse();

      Eigen::Matrix2d gradu = Eigen::Matrix2d::Zero();
      for (int l = 0; l < nlp; ++l)
        gradu += Eigen::Vector2d(ue[2 * l], ue[2 * l + 1]) * dNx.row(l);

      Eigen::Matrix2d P;
      if (model.kind == PdeKind::NeoHookean)
        P = first_piola(Eigen::Matrix2d::Identity() + gradu, mat, e);
      else
        P = linear_stress(gradu, mat);

      for (int l = 0; l < nlp; ++l)
        for (int d = 0; d < 2; ++d)
          Re[2 * l + d] += w * P.row(d).dot(dNx.row(l));

      if (Ke) {
        const Eigen::Matrix2d F = Eigen::Matrix2d::Identity() + gradu;
        for (int lc = 0; lc < nlp; ++lc)
          for (int dc = 0; dc < 2; ++dc) {
            Eigen::Matrix2d dF = Eigen::Matrix2d::Zero();
            dF.row(dc) = dNx.row(lc);
            const Eigen::Matrix2d dP = model.kind == PdeKind::NeoHookean
                                           ? piola_tangent_apply(F, dF, mat)
                                           : linear_stress(dF, mat);
            for (int lr = 0; lr < nlp; ++lr)
              for (int dr = 0; dr < 2; ++dr)
                (*Ke)(2 * lr + dr, 2 * lc + dc) += w * dP.row(dr).dot(dNx.row(lr));
          }
      }
    }
}

inline void elem_kernel_1d(const ComponentModel& model, int e, const Eigen::VectorXd& ue,
                           Eigen::VectorXd& Re, Eigen::MatrixXd* Ke) {
  const Mesh& mesh = *model.mesh;
  const int p = mesh.degree, nlp = mesh.n_lp();
  const GaussRule g = gauss_rule(p + 1);
  Re.setZero(nlp);
  if (Ke) Ke->setZero(nlp, nlp);
  Eigen::VectorXd N, dN;
  for (std::size_t q = 0; q < g.pts.size(); ++q) {
    shape1d(p, g.pts[q], N);
    shape1d_grad(p, g.pts[q], dN);
    double J = 0;
    for (int l = 0; l < nlp; ++l) J += mesh.nodes(mesh.conn(e, l), 0) * dN[l];
    if (J <= 0.0) throw InvertedElementError(e);
    const double w = g.wts[q] * J;
    double up = 0;
    for (int l = 0; l < nlp; ++l) up += ue[l] * dN[l] / J;
    for (int l = 0; l < nlp; ++l) {
      Re[l] += w * (up * dN[l] / J + model.source * N[l]);
      if (model.kind == PdeKind::AdvDiff1d) Re[l] += w * model.gamma * up * N[l];
    }
    if (Ke) {
      for (int lr = 0; lr < nlp; ++lr)
        for (int lc = 0; lc < nlp; ++lc) {
          (*Ke)(lr, lc) += w * (dN[lr] / J) * (dN[lc] / J);
          if (model.kind == PdeKind::AdvDiff1d)
            (*Ke)(lr, lc) += w * model.gamma * N[lr] * (dN[lc] / J);
        }
    }
  }
}

// Traction contribution of one tagged facet: R -= int t . phi. Returns the
// element the facet belongs to.
template <class AddDof>
void facet_traction(const ComponentModel& model, const std::string& tag, const Facet& f,
                    double scale, AddDof&& add) {
  const Mesh& mesh = *model.mesh;
  const int p = mesh.degree;
  const GaussRule g = gauss_rule(p + 1);
  const auto locals = mesh.edge_locals(f.edge);
  Eigen::VectorXd L, dL;
  for (std::size_t k = 0; k < g.pts.size(); ++k) {
    shape1d(p, g.pts[k], L);
    shape1d_grad(p, g.pts[k], dL);
    Eigen::Vector2d x = Eigen::Vector2d::Zero(), t = Eigen::Vector2d::Zero();
    for (int a = 0; a <= p; ++a) {
      const Eigen::Vector2d xa = mesh.nodes.row(mesh.conn(f.elem, locals[a])).transpose();
      x += L[a] * xa;
      t += dL[a] * xa;
    }
    const double w = g.wts[k] * t.norm() * scale;
    Eigen::Vector2d trac(0, 0);
    if (tag == "neumann-r")
      trac = Eigen::Vector2d(0.0, -model.load.s);
    else if (tag == "neumann-top")
      trac = model.load.g_scale * Eigen::Vector2d(0.0, -4.0 * x[0] * (1.0 - x[0]));
    for (int a = 0; a <= p; ++a)
      for (int d = 0; d < 2; ++d)
        add(mesh.conn(f.elem, locals[a]) * 2 + d, -w * trac[d] * L[a]);
  }
}

}  // namespace detail

// Weighted residual. An empty weight vector means high-fidelity quadrature
// (all weights one); elements with zero weight are skipped entirely.
inline Eigen::VectorXd assemble_residual(const ComponentModel& model,
                                         const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& weights = {}) {
  const Mesh& mesh = *model.mesh;
  detail::check_weights(weights, mesh.n_elems());
  const int D = model.space->D;
  Eigen::VectorXd R = Eigen::VectorXd::Zero(model.space->n_dofs());
  Eigen::VectorXd ue(mesh.n_lp() * D), Re;
  for (int e = 0; e < mesh.n_elems(); ++e) {
    const double we = weights.size() ? weights[e] : 1.0;
    if (we == 0.0) continue;
    for (int l = 0; l < mesh.n_lp(); ++l)
      for (int d = 0; d < D; ++d) ue[l * D + d] = u[mesh.conn(e, l) * D + d];
    if (mesh.dim == 2)
      detail::elem_kernel_2d(model, e, ue, Re, nullptr);
    else
      detail::elem_kernel_1d(model, e, ue, Re, nullptr);
    for (int l = 0; l < mesh.n_lp(); ++l)
      for (int d = 0; d < D; ++d) R[mesh.conn(e, l) * D + d] += we * Re[l * D + d];
  }
  if (mesh.dim == 2) {
    for (const char* tag : {"neumann-r", "neumann-top"}) {
      auto it = mesh.tags.find(tag);
      if (it == mesh.tags.end()) continue;
      for (const Facet& f : it->second) {
        const double we = weights.size() ? weights[f.elem] : 1.0;
        if (we == 0.0) continue;
        detail::facet_traction(model, tag, f, we,
                               [&](int dof, double v) { R[dof] += v; });
      }
    }
  }
  return R;
}

inline Eigen::SparseMatrix<double> assemble_jacobian(const ComponentModel& model,
                                                     const Eigen::VectorXd& u,
                                                     const Eigen::VectorXd& weights = {}) {
  const Mesh& mesh = *model.mesh;
  detail::check_weights(weights, mesh.n_elems());
  const int D = model.space->D;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd ue(mesh.n_lp() * D), Re;
  Eigen::MatrixXd Ke;
  for (int e = 0; e < mesh.n_elems(); ++e) {
    const double we = weights.size() ? weights[e] : 1.0;
    if (we == 0.0) continue;
    for (int l = 0; l < mesh.n_lp(); ++l)
      for (int d = 0; d < D; ++d) ue[l * D + d] = u[mesh.conn(e, l) * D + d];
    if (mesh.dim == 2)
      detail::elem_kernel_2d(model, e, ue, Re, &Ke);
    else
      detail::elem_kernel_1d(model, e, ue, Re, &Ke);
    for (int a = 0; a < mesh.n_lp(); ++a)
      for (int da = 0; da < D; ++da)
        for (int b = 0; b < mesh.n_lp(); ++b)
          for (int db = 0; db < D; ++db)
            trips.emplace_back(mesh.conn(e, a) * D + da, mesh.conn(e, b) * D + db,
                               we * Ke(a * D + da, b * D + db));
  }
  Eigen::SparseMatrix<double> K(model.space->n_dofs(), model.space->n_dofs());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

// Reduced-space residual and partial Jacobians: rhat = Z^T R(u),
// Jaa = Z^T K Z, Jab = Z^T K W, contracted element by element so the cost
// scales with the number of active elements only. Any output pointer may be
// null. When Gcols is given, its column e receives the unweighted reduced
// residual contribution of element e (the empirical-quadrature constraint
// data).
inline void assemble_reduced(const ComponentModel& model, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& weights, const Eigen::MatrixXd& Z,
                             const Eigen::MatrixXd& W, Eigen::VectorXd* rhat,
                             Eigen::MatrixXd* Jaa, Eigen::MatrixXd* Jab,
                             Eigen::MatrixXd* Gcols = nullptr) {
  const Mesh& mesh = *model.mesh;
  detail::check_weights(weights, mesh.n_elems());
  const int D = model.space->D;
  const int n = static_cast<int>(Z.cols()), m = static_cast<int>(W.cols());
  const int ndof_e = mesh.n_lp() * D;
  if (rhat) rhat->setZero(n);
  if (Jaa) Jaa->setZero(n, n);
  if (Jab) Jab->setZero(n, m);
  if (Gcols) Gcols->setZero(n, mesh.n_elems());

  Eigen::VectorXd ue(ndof_e), Re;
  Eigen::MatrixXd Ke, Ze(ndof_e, n), We(ndof_e, m);
  const bool want_K = Jaa || Jab;
  for (int e = 0; e < mesh.n_elems(); ++e) {
    const double we = weights.size() ? weights[e] : 1.0;
    if (we == 0.0 && !Gcols) continue;
    for (int l = 0; l < mesh.n_lp(); ++l)
      for (int d = 0; d < D; ++d) {
        const int dof = mesh.conn(e, l) * D + d;
        ue[l * D + d] = u[dof];
        Ze.row(l * D + d) = Z.row(dof);
        if (m) We.row(l * D + d) = W.row(dof);
      }
    if (mesh.dim == 2)
      detail::elem_kernel_2d(model, e, ue, Re, want_K ? &Ke : nullptr);
    else
      detail::elem_kernel_1d(model, e, ue, Re, want_K ? &Ke : nullptr);

    // facet tractions belong to their element and share its weight
    if (mesh.dim == 2) {
      for (const char* tag : {"neumann-r", "neumann-top"}) {
        auto it = mesh.tags.find(tag);
        if (it == mesh.tags.end()) continue;
        for (const Facet& f : it->second) {
          if (f.elem != e) continue;
          detail::facet_traction(model, tag, f, 1.0, [&](int dof, double v) {
            for (int l = 0; l < mesh.n_lp(); ++l)
              for (int d = 0; d < D; ++d)
                if (mesh.conn(e, l) * D + d == dof) Re[l * D + d] += v;
          });
        }
      }
    }

    const Eigen::VectorXd re = Ze.transpose() * Re;
    if (rhat && we != 0.0) *rhat += we * re;
    if (Gcols) Gcols->col(e) = re;
    if (want_K && we != 0.0) {
      const Eigen::MatrixXd ZtK = Ze.transpose() * Ke;
      if (Jaa) *Jaa += we * (ZtK * Ze);
      if (Jab) *Jab += we * (ZtK * We);
    }
  }
}

// Integral of 1 over each element (constant-accuracy data for element EQ).
inline Eigen::VectorXd element_measures(const Mesh& mesh) {
  Eigen::VectorXd meas = Eigen::VectorXd::Zero(mesh.n_elems());
  const int p = mesh.degree;
  const GaussRule g = gauss_rule(p + 1);
  Eigen::MatrixXd dN;
  Eigen::VectorXd dN1;
  for (int e = 0; e < mesh.n_elems(); ++e) {
    if (mesh.dim == 2) {
      for (std::size_t qy = 0; qy < g.pts.size(); ++qy)
        for (std::size_t qx = 0; qx < g.pts.size(); ++qx) {
          shape2d_grad(p, {g.pts[qx], g.pts[qy]}, dN);
          Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
          for (int l = 0; l < mesh.n_lp(); ++l)
            J += mesh.nodes.row(mesh.conn(e, l)).transpose() * dN.row(l);
          meas[e] += g.wts[qx] * g.wts[qy] * J.determinant();
        }
    } else {
      for (std::size_t q = 0; q < g.pts.size(); ++q) {
        shape1d_grad(p, g.pts[q], dN1);
        double J = 0;
        for (int l = 0; l < mesh.n_lp(); ++l) J += mesh.nodes(mesh.conn(e, l), 0) * dN1[l];
        meas[e] += g.wts[q] * J;
      }
    }
  }
  return meas;
}

}  // namespace os2

#endif  // OS2_NEOHOOKEAN_HPP
