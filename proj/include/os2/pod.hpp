#ifndef OS2_POD_HPP
#define OS2_POD_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "os2/component.hpp"
#include "os2/hf_solvers.hpp"

// Offline data compression: snapshot harvesting from component-based solves,
// bubble/port splitting through the extension operator, POD by the method of
// snapshots, and the projected coefficients consumed by hyper-reduction.

namespace os2 {

struct SnapshotSet {
  // one entry per archetype (0 internal, 1 external)
  std::vector<std::vector<Eigen::VectorXd>> bubble{2};
  std::vector<std::vector<Eigen::VectorXd>> port{2};
  std::vector<std::vector<Eigen::VectorXd>> mu{2};  // local parameters per snapshot
  std::vector<std::vector<int>> config_id{2};

  int count(int arch) const { return static_cast<int>(bubble[arch].size()); }
};

// Pull back the per-component fields of solved configurations onto the
// archetypes and split them into bubble and extended-port parts. With the
// discretize-then-map treatment the pullback is the dof vector itself.
inline void harvest_into(SnapshotSet& set, const DeployedSystem& sys,
                         const HfCbSolution& sol, int config_id) {
  for (int i = 0; i < sys.n_dd(); ++i) {
    const Archetype& arch = sys.arch_of(i);
    Eigen::VectorXd b, p;
    arch.split(sol.fields[i], b, p);
    const int a = sys.comps[i].arch;
    set.bubble[a].push_back(std::move(b));
    set.port[a].push_back(std::move(p));
    set.mu[a].push_back(sys.comps[i].mu);
    set.config_id[a].push_back(config_id);
  }
}

inline SnapshotSet harvest(const ComponentLibrary& lib,
                           const std::vector<GlobalParams>& train,
                           const NewtonConfig& cfg,
                           std::vector<HfCbSolution>* solutions = nullptr,
                           std::vector<DeployedSystem>* systems = nullptr) {
  SnapshotSet set;
  for (std::size_t k = 0; k < train.size(); ++k) {
    DeployedSystem sys = instantiate(lib, train[k]);
    HfCbSolution sol;
    try {
      sol = solve_hf_cb(sys, cfg);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training solve failed for configuration " +
                               std::to_string(k) + ": " + e.what());
    }
    harvest_into(set, sys, sol, static_cast<int>(k));
    if (solutions) solutions->push_back(sol);
    if (systems) systems->push_back(std::move(sys));
  }
  return set;
}

struct PodResult {
  Eigen::MatrixXd modes;            // N x k, orthonormal in the given inner product
  Eigen::VectorXd singular_values;  // nonincreasing
  bool truncated_to_rank = false;
};

// Method of snapshots: eigen-decomposition of the Gram matrix in the
// component inner product. Requesting more modes than the dataset rank
// returns the rank and flags it.
inline PodResult pod(const std::vector<Eigen::VectorXd>& data, const InnerProduct& ip,
                     int k) {
  const int ns = static_cast<int>(data.size());
  if (ns == 0) throw std::invalid_argument("pod: empty dataset");
  if (k > ns) throw std::invalid_argument("pod: requested more modes than snapshots");
  Eigen::MatrixXd G(ns, ns);
  std::vector<Eigen::VectorXd> Mdata(ns);
  for (int j = 0; j < ns; ++j) Mdata[j] = ip.M * data[j];
  for (int i = 0; i < ns; ++i)
    for (int j = i; j < ns; ++j) G(i, j) = G(j, i) = data[i].dot(Mdata[j]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pod: eigen solve failed");
  const Eigen::VectorXd evals = eig.eigenvalues();  // ascending
  const double thresh = std::max(evals.maxCoeff(), 0.0) * 1e-13;

  PodResult out;
  std::vector<int> keep;
  for (int j = ns - 1; j >= 0 && static_cast<int>(keep.size()) < k; --j)
    if (evals[j] > thresh) keep.push_back(j);
  out.truncated_to_rank = static_cast<int>(keep.size()) < k;

  const int r = static_cast<int>(keep.size());
  out.modes.resize(data[0].size(), r);
  out.singular_values.resize(r);
  for (int c = 0; c < r; ++c) {
    const double sigma = std::sqrt(evals[keep[c]]);
    out.singular_values[c] = sigma;
    Eigen::VectorXd mode = Eigen::VectorXd::Zero(data[0].size());
    for (int j = 0; j < ns; ++j) mode += eig.eigenvectors()(j, keep[c]) * data[j];
    mode /= sigma;
    // reproducible sign: largest-magnitude entry positive
    Eigen::Index imax;
    mode.cwiseAbs().maxCoeff(&imax);
    if (mode[imax] < 0) mode = -mode;
    out.modes.col(c) = mode;
  }
  return out;
}

struct ProjectedCoefficients {
  // per archetype: columns are training snapshots
  Eigen::MatrixXd alpha[2];
  Eigen::MatrixXd beta[2];
  std::vector<Eigen::VectorXd> mu[2];
  std::vector<int> config_id[2];

  Eigen::VectorXd alpha_mean(int a) const { return alpha[a].rowwise().mean(); }
  Eigen::VectorXd beta_mean(int a) const { return beta[a].rowwise().mean(); }
};

// Coefficients of the inner-product-orthogonal projection of every snapshot
// onto its archetype bases.
inline ProjectedCoefficients project_coefficients(const SnapshotSet& set,
                                                  const ComponentLibrary& lib) {
  ProjectedCoefficients pc;
  for (int a = 0; a < 2; ++a) {
    const Archetype& arch = lib.arch(a);
    if (arch.Zb.size() == 0 || arch.Wp.size() == 0)
      throw std::runtime_error("project_coefficients: archetype bases missing");
    const int ns = set.count(a);
    pc.alpha[a].resize(arch.Zb.cols(), ns);
    pc.beta[a].resize(arch.Wp.cols(), ns);
    for (int j = 0; j < ns; ++j) {
      pc.alpha[a].col(j) = arch.Zb.transpose() * (arch.ip.M * set.bubble[a][j]);
      pc.beta[a].col(j) = arch.Wp.transpose() * (arch.ip.M * set.port[a][j]);
    }
    pc.mu[a] = set.mu[a];
    pc.config_id[a] = set.config_id[a];
  }
  return pc;
}

// Run POD per archetype and store the bases plus coefficient sample means on
// the library.
inline ProjectedCoefficients train_bases(ComponentLibrary& lib, const SnapshotSet& set,
                                         int n, int m) {
  for (int a = 0; a < 2; ++a) {
    Archetype& arch = a == 0 ? lib.internal : lib.external;
    PodResult pb = pod(set.bubble[a], arch.ip, n);
    PodResult pp = pod(set.port[a], arch.ip, m);
    arch.Zb = pb.modes;
    arch.sv_b = pb.singular_values;
    arch.Wp = pp.modes;
    arch.sv_p = pp.singular_values;
  }
  ProjectedCoefficients pc = project_coefficients(set, lib);
  for (int a = 0; a < 2; ++a) {
    Archetype& arch = a == 0 ? lib.internal : lib.external;
    arch.alpha_mean = pc.alpha_mean(a);
    arch.beta_mean = pc.beta_mean(a);
  }
  return pc;
}

}  // namespace os2

#endif  // OS2_POD_HPP
