#ifndef OS2_FE_SPACE_HPP
#define OS2_FE_SPACE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <set>
#include <string>
#include <vector>

#include "os2/mesh.hpp"

namespace os2 {

// Nodal FE space over a mesh with D state variables per node. Constraints
// pin single dofs to fixed values (homogeneous Dirichlet everywhere in the
// 2d benchmark; the 1d validation problems carry nonzero boundary values).
struct FeSpace {
  const Mesh* mesh = nullptr;
  int D = 1;
  std::vector<std::uint8_t> constrained;
  std::vector<double> constraint_value;

  FeSpace() = default;
  FeSpace(const Mesh& m, int D_) : mesh(&m), D(D_) {
    constrained.assign(static_cast<std::size_t>(m.n_nodes()) * D, 0);
    constraint_value.assign(static_cast<std::size_t>(m.n_nodes()) * D, 0.0);
  }

  int n_dofs() const { return mesh->n_nodes() * D; }

  std::vector<int> tag_nodes(const std::string& tag) const {
    std::set<int> s;
    auto it = mesh->tags.find(tag);
    if (it == mesh->tags.end()) return {};
    for (const Facet& f : it->second) {
      if (mesh->dim == 1) {
        s.insert(mesh->conn(f.elem, f.edge == 0 ? 0 : mesh->degree));
      } else {
        for (int l : mesh->edge_locals(f.edge)) s.insert(mesh->conn(f.elem, l));
      }
    }
    return {s.begin(), s.end()};
  }

  // component < 0 constrains all D components.
  void constrain(const std::string& tag, int component = -1, double value = 0.0) {
    for (int node : tag_nodes(tag))
      for (int d = 0; d < D; ++d)
        if (component < 0 || d == component) {
          constrained[static_cast<std::size_t>(node) * D + d] = 1;
          constraint_value[static_cast<std::size_t>(node) * D + d] = value;
        }
  }

  void apply_constraints(Eigen::VectorXd& u) const {
    for (int i = 0; i < n_dofs(); ++i)
      if (constrained[i]) u[i] = constraint_value[i];
  }

  std::vector<int> free_dofs() const {
    std::vector<int> f;
    for (int i = 0; i < n_dofs(); ++i)
      if (!constrained[i]) f.push_back(i);
    return f;
  }
};

enum class IpKind { H1, L2 };

// Symmetric positive matrix realizing the component inner product; assembled
// raw over all dofs (fields carry zeros on constrained dofs).
struct InnerProduct {
  Eigen::SparseMatrix<double> M;
  IpKind kind = IpKind::H1;

  double dot(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    return u.dot(M * v);
  }
  double norm(const Eigen::VectorXd& u) const { return std::sqrt(std::max(0.0, dot(u, u))); }
};

inline InnerProduct assemble_inner_product(const FeSpace& space, IpKind kind) {
  const Mesh& mesh = *space.mesh;
  const int D = space.D, p = mesh.degree, nlp = mesh.n_lp();
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::MatrixXd ke(nlp, nlp);

  if (mesh.dim == 2) {
    const GaussRule g = gauss_rule(p + 1);
    Eigen::VectorXd N;
    Eigen::MatrixXd dN;
    for (int e = 0; e < mesh.n_elems(); ++e) {
      ke.setZero();
      for (std::size_t qy = 0; qy < g.pts.size(); ++qy)
        for (std::size_t qx = 0; qx < g.pts.size(); ++qx) {
          const Eigen::Vector2d xi(g.pts[qx], g.pts[qy]);
          shape2d(p, xi, N);
          shape2d_grad(p, xi, dN);
          Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
          for (int l = 0; l < nlp; ++l)
            J += mesh.nodes.row(mesh.conn(e, l)).transpose() * dN.row(l);
          const double detJ = J.determinant();
          if (detJ <= 0.0)
            throw std::runtime_error("degenerate element " + std::to_string(e) +
                                     " (non-positive Jacobian)");
          const double w = g.wts[qx] * g.wts[qy] * detJ;
          const Eigen::MatrixXd dNx = dN * J.inverse();
          ke += w * (N * N.transpose());
          if (kind == IpKind::H1) ke += w * (dNx * dNx.transpose());
        }
      for (int a = 0; a < nlp; ++a)
        for (int b = 0; b < nlp; ++b)
          for (int d = 0; d < D; ++d)
            trips.emplace_back(mesh.conn(e, a) * D + d, mesh.conn(e, b) * D + d, ke(a, b));
    }
  } else {
    const GaussRule g = gauss_rule(p + 1);
    Eigen::VectorXd N, dN;
    for (int e = 0; e < mesh.n_elems(); ++e) {
      ke.setZero();
      for (std::size_t q = 0; q < g.pts.size(); ++q) {
        shape1d(p, g.pts[q], N);
        shape1d_grad(p, g.pts[q], dN);
        double J = 0;
        for (int l = 0; l < nlp; ++l) J += mesh.nodes(mesh.conn(e, l), 0) * dN[l];
        if (J <= 0.0)
          throw std::runtime_error("degenerate element " + std::to_string(e));
        const double w = g.wts[q] * J;
        ke += w * (N * N.transpose());
        if (kind == IpKind::H1) ke += (w / (J * J)) * (dN * dN.transpose());
      }
      for (int a = 0; a < nlp; ++a)
        for (int b = 0; b < nlp; ++b)
          for (int d = 0; d < D; ++d)
            trips.emplace_back(mesh.conn(e, a) * D + d, mesh.conn(e, b) * D + d, ke(a, b));
    }
  }

  InnerProduct ip;
  ip.kind = kind;
  ip.M.resize(space.n_dofs(), space.n_dofs());
  ip.M.setFromTriplets(trips.begin(), trips.end());
  return ip;
}

}  // namespace os2

#endif  // OS2_FE_SPACE_HPP
