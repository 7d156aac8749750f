#ifndef OS2_MESH_HPP
#define OS2_MESH_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "os2/basis.hpp"
#include "os2/io.hpp"

// Tensor-product structured meshes (1d lines, 2d quads of degree 1 or 2)
// with named boundary-facet tags, closed-form point location and FE
// interpolation. Cells may be deactivated to carve holes (the external
// component is a rectangle minus a notch); node numbering is compacted
// over active cells only.

namespace os2 {

struct Facet {
  int elem = -1;
  int edge = -1;  // 2d: 0 bottom, 1 right, 2 top, 3 left; 1d: 0 left, 1 right
};

struct Located {
  int elem = -1;
  Eigen::Vector2d xi{0, 0};  // reference coordinates in [-1,1]^dim
};

class OutsideDomainError : public std::runtime_error {
 public:
  explicit OutsideDomainError(double dist)
      : std::runtime_error("point outside mesh (nearest element at distance " +
                           std::to_string(dist) + ")"),
        nearest_distance(dist) {}
  double nearest_distance;
};

class Mesh {
 public:
  int dim = 2;
  int degree = 2;
  Eigen::MatrixXd nodes;  // n_nodes x dim
  Eigen::MatrixXi conn;   // n_elems x n_lp
  std::map<std::string, std::vector<Facet>> tags;

  // Structured payload. knots are strictly increasing cell boundaries in the
  // mesh's own coordinates; cell_elem maps (cx, cy) -> element id or -1.
  std::vector<double> knots_x, knots_y;
  std::vector<int> cell_elem;
  bool structured = true;

  int n_nodes() const { return static_cast<int>(nodes.rows()); }
  int n_elems() const { return static_cast<int>(conn.rows()); }
  int n_lp() const { return static_cast<int>(conn.cols()); }
  int nx() const { return static_cast<int>(knots_x.size()) - 1; }
  int ny() const { return dim == 2 ? static_cast<int>(knots_y.size()) - 1 : 0; }

  static Mesh tensor2d(const std::vector<double>& kx, const std::vector<double>& ky,
                       int degree, const std::vector<std::uint8_t>& active = {}) {
    Mesh m;
    m.dim = 2;
    m.degree = degree;
    m.knots_x = kx;
    m.knots_y = ky;
    const int nx = m.nx(), ny = m.ny();
    const int p = degree, q = p + 1;
    const int fx = p * nx + 1, fy = p * ny + 1;

    auto fine_coord = [p](const std::vector<double>& knots, int i) {
      const int cell = std::min(i / p, static_cast<int>(knots.size()) - 2);
      const int sub = i - p * cell;
      return knots[cell] + (knots[cell + 1] - knots[cell]) * sub / p;
    };

    m.cell_elem.assign(static_cast<std::size_t>(nx) * ny, -1);
    std::vector<int> node_id(static_cast<std::size_t>(fx) * fy, -1);
    std::vector<std::array<int, 2>> kept;
    int n_elem = 0;
    for (int cy = 0; cy < ny; ++cy)
      for (int cx = 0; cx < nx; ++cx) {
        if (!active.empty() && !active[static_cast<std::size_t>(cy) * nx + cx]) continue;
        m.cell_elem[static_cast<std::size_t>(cy) * nx + cx] = n_elem++;
        for (int b = 0; b < q; ++b)
          for (int a = 0; a < q; ++a) {
            const int fi = p * cx + a, fj = p * cy + b;
            int& id = node_id[static_cast<std::size_t>(fj) * fx + fi];
            if (id < 0) {
              id = static_cast<int>(kept.size());
              kept.push_back({fi, fj});
            }
          }
      }

    m.nodes.resize(static_cast<Eigen::Index>(kept.size()), 2);
    for (std::size_t k = 0; k < kept.size(); ++k) {
      m.nodes(static_cast<Eigen::Index>(k), 0) = fine_coord(kx, kept[k][0]);
      m.nodes(static_cast<Eigen::Index>(k), 1) = fine_coord(ky, kept[k][1]);
    }
    m.conn.resize(n_elem, q * q);
    for (int cy = 0; cy < ny; ++cy)
      for (int cx = 0; cx < nx; ++cx) {
        const int e = m.cell_elem[static_cast<std::size_t>(cy) * nx + cx];
        if (e < 0) continue;
        for (int b = 0; b < q; ++b)
          for (int a = 0; a < q; ++a)
            m.conn(e, q * b + a) =
                node_id[static_cast<std::size_t>(p * cy + b) * fx + (p * cx + a)];
      }
    return m;
  }

  static Mesh line1d(const std::vector<double>& kx, int degree) {
    Mesh m;
    m.dim = 1;
    m.degree = degree;
    m.knots_x = kx;
    const int nx = m.nx();
    const int p = degree, q = p + 1;
    const int fx = p * nx + 1;
    m.nodes.resize(fx, 1);
    for (int i = 0; i < fx; ++i) {
      const int cell = std::min(i / p, nx - 1);
      const int sub = i - p * cell;
      m.nodes(i, 0) = kx[cell] + (kx[cell + 1] - kx[cell]) * sub / p;
    }
    m.conn.resize(nx, q);
    for (int e = 0; e < nx; ++e)
      for (int a = 0; a < q; ++a) m.conn(e, a) = p * e + a;
    m.cell_elem.resize(nx);
    for (int e = 0; e < nx; ++e) m.cell_elem[e] = e;
    return m;
  }

  // Local node indices along an edge of a 2d element, ordered by increasing
  // local parameter.
  std::vector<int> edge_locals(int edge) const {
    const int q = degree + 1;
    std::vector<int> l(q);
    for (int a = 0; a < q; ++a) {
      switch (edge) {
        case 0: l[a] = a; break;                    // bottom, param +x
        case 1: l[a] = q * a + (q - 1); break;      // right, param +y
        case 2: l[a] = q * (q - 1) + a; break;      // top, param +x
        default: l[a] = q * a; break;               // left, param +y
      }
    }
    return l;
  }

  int cell_of_elem(int e, int& cx, int& cy) const {
    for (int c = 0; c < static_cast<int>(cell_elem.size()); ++c)
      if (cell_elem[c] == e) {
        cx = c % nx();
        cy = c / nx();
        return c;
      }
    return -1;
  }

  // --- point location ----------------------------------------------------

  // Candidate knot intervals containing x within tol (at most three).
  static void interval_candidates(const std::vector<double>& knots, double x, double tol,
                                  int out[3], int& n_out) {
    n_out = 0;
    const int n = static_cast<int>(knots.size()) - 1;
    if (x < knots.front() - tol || x > knots.back() + tol) return;
    int j = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), x) -
                             knots.begin()) - 1;
    j = std::clamp(j, 0, n - 1);
    if (j > 0 && x <= knots[j] + tol) out[n_out++] = j - 1;
    out[n_out++] = j;
    if (j < n - 1 && x >= knots[j + 1] - tol) out[n_out++] = j + 1;
  }

  std::optional<Located> try_locate(const Eigen::Vector2d& x, double tol = 1e-10) const {
    if (dim == 1) {
      int cxs[3], ncx;
      interval_candidates(knots_x, x[0], tol, cxs, ncx);
      for (int k = 0; k < ncx; ++k) {
        const int e = cell_elem[cxs[k]];
        if (e < 0) continue;
        Located loc;
        loc.elem = e;
        const double a = knots_x[cxs[k]], b = knots_x[cxs[k] + 1];
        loc.xi[0] = std::clamp(2.0 * (x[0] - a) / (b - a) - 1.0, -1.0, 1.0);
        loc.xi[1] = 0;
        return loc;
      }
      return std::nullopt;
    }
    int cxs[3], cys[3], ncx, ncy;
    interval_candidates(knots_x, x[0], tol, cxs, ncx);
    interval_candidates(knots_y, x[1], tol, cys, ncy);
    int best = -1, best_cx = -1, best_cy = -1;
    for (int ky = 0; ky < ncy; ++ky)
      for (int kx = 0; kx < ncx; ++kx) {
        const int e = cell_elem[static_cast<std::size_t>(cys[ky]) * nx() + cxs[kx]];
        if (e < 0) continue;
        if (best < 0 || e < best) {
          best = e;
          best_cx = cxs[kx];
          best_cy = cys[ky];
        }
      }
    if (best < 0) return std::nullopt;
    Located loc;
    loc.elem = best;
    const double ax = knots_x[best_cx], bx = knots_x[best_cx + 1];
    const double ay = knots_y[best_cy], by = knots_y[best_cy + 1];
    loc.xi[0] = std::clamp(2.0 * (x[0] - ax) / (bx - ax) - 1.0, -1.0, 1.0);
    loc.xi[1] = std::clamp(2.0 * (x[1] - ay) / (by - ay) - 1.0, -1.0, 1.0);
    return loc;
  }

  Located locate(const Eigen::Vector2d& x, double tol = 1e-10) const {
    auto loc = try_locate(x, tol);
    if (!loc) throw OutsideDomainError(nearest_distance(x));
    return *loc;
  }

  // Distance from x to the nearest active cell (reported with the
  // outside-domain error).
  double nearest_distance(const Eigen::Vector2d& x) const {
    double best = std::numeric_limits<double>::max();
    auto clamp_dist = [](double v, double a, double b) {
      return v < a ? a - v : (v > b ? v - b : 0.0);
    };
    if (dim == 1) {
      for (int c = 0; c < nx(); ++c) {
        if (cell_elem[c] < 0) continue;
        best = std::min(best, clamp_dist(x[0], knots_x[c], knots_x[c + 1]));
      }
      return best;
    }
    for (int cy = 0; cy < ny(); ++cy)
      for (int cx = 0; cx < nx(); ++cx) {
        if (cell_elem[static_cast<std::size_t>(cy) * nx() + cx] < 0) continue;
        const double dx = clamp_dist(x[0], knots_x[cx], knots_x[cx + 1]);
        const double dy = clamp_dist(x[1], knots_y[cy], knots_y[cy + 1]);
        best = std::min(best, std::hypot(dx, dy));
      }
    return best;
  }

  // --- interpolation ------------------------------------------------------

  // Value of a D-component nodal field at a located point.
  Eigen::VectorXd value_at(const Located& loc, const Eigen::VectorXd& field, int D) const {
    Eigen::VectorXd N;
    if (dim == 2)
      shape2d(degree, loc.xi, N);
    else
      shape1d(degree, loc.xi[0], N);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(D);
    for (int l = 0; l < n_lp(); ++l) {
      const int node = conn(loc.elem, l);
      for (int d = 0; d < D; ++d) v[d] += N[l] * field[node * D + d];
    }
    return v;
  }

  // Physical-space gradient, D x dim.
  Eigen::MatrixXd grad_at(const Located& loc, const Eigen::VectorXd& field, int D) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(D, dim);
    if (dim == 2) {
      Eigen::MatrixXd dN;
      shape2d_grad(degree, loc.xi, dN);
      Eigen::Matrix2d J = Eigen::Matrix2d::Zero();  // dx/dxi
      for (int l = 0; l < n_lp(); ++l)
        J += nodes.row(conn(loc.elem, l)).transpose() * dN.row(l);
      const Eigen::Matrix2d Jinv = J.inverse();
      for (int l = 0; l < n_lp(); ++l) {
        const int node = conn(loc.elem, l);
        const Eigen::RowVector2d dNx = dN.row(l) * Jinv;
        for (int d = 0; d < D; ++d) g.row(d) += field[node * D + d] * dNx;
      }
    } else {
      Eigen::VectorXd dN;
      shape1d_grad(degree, loc.xi[0], dN);
      double J = 0;
      for (int l = 0; l < n_lp(); ++l) J += nodes(conn(loc.elem, l), 0) * dN[l];
      for (int l = 0; l < n_lp(); ++l) {
        const int node = conn(loc.elem, l);
        for (int d = 0; d < D; ++d) g(d, 0) += field[node * D + d] * dN[l] / J;
      }
    }
    return g;
  }

  Eigen::VectorXd interpolate(const Eigen::Vector2d& x, const Eigen::VectorXd& field,
                              int D, double tol = 1e-10) const {
    return value_at(locate(x, tol), field, D);
  }

  // --- persistence ("OS2M") ----------------------------------------------

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) io_fail("cannot open for write", path);
    detail::write_magic(os, "OS2M");
    detail::write_pod<std::uint32_t>(os, 1);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(dim));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(n_nodes()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(n_elems()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(n_lp()));
    for (Eigen::Index i = 0; i < nodes.rows(); ++i)
      for (int d = 0; d < dim; ++d) detail::write_pod<double>(os, nodes(i, d));
    for (Eigen::Index e = 0; e < conn.rows(); ++e)
      for (Eigen::Index l = 0; l < conn.cols(); ++l)
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(conn(e, l)));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tags.size()));
    const int pack = dim == 2 ? 4 : 2;
    for (const auto& [name, facets] : tags) {
      detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(facets.size()));
      for (const Facet& f : facets)
        detail::write_pod<std::uint32_t>(os,
                                         static_cast<std::uint32_t>(pack * f.elem + f.edge));
    }
    // structured payload (degree + knots); version-1 extension block
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(degree));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(knots_x.size()));
    for (double k : knots_x) detail::write_pod<double>(os, k);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(knots_y.size()));
    for (double k : knots_y) detail::write_pod<double>(os, k);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cell_elem.size()));
    for (int c : cell_elem) detail::write_pod<std::int32_t>(os, c);
  }

  static Mesh load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) io_fail("cannot open", path);
    detail::expect_magic(is, "OS2M", path);
    auto version = detail::read_pod<std::uint32_t>(is);
    if (version != 1) io_fail("unsupported version", path);
    Mesh m;
    m.dim = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    const auto nv = detail::read_pod<std::uint32_t>(is);
    const auto ne = detail::read_pod<std::uint32_t>(is);
    const auto nlp = detail::read_pod<std::uint32_t>(is);
    m.nodes.resize(nv, m.dim);
    for (std::uint32_t i = 0; i < nv; ++i)
      for (int d = 0; d < m.dim; ++d) m.nodes(i, d) = detail::read_pod<double>(is);
    m.conn.resize(ne, nlp);
    for (std::uint32_t e = 0; e < ne; ++e)
      for (std::uint32_t l = 0; l < nlp; ++l)
        m.conn(e, l) = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    const auto ntags = detail::read_pod<std::uint32_t>(is);
    const int pack = m.dim == 2 ? 4 : 2;
    for (std::uint32_t t = 0; t < ntags; ++t) {
      const auto len = detail::read_pod<std::uint32_t>(is);
      std::string name(len, '\0');
      is.read(name.data(), len);
      const auto nf = detail::read_pod<std::uint32_t>(is);
      std::vector<Facet> facets(nf);
      for (auto& f : facets) {
        const auto packed = detail::read_pod<std::uint32_t>(is);
        f.elem = static_cast<int>(packed) / pack;
        f.edge = static_cast<int>(packed) % pack;
      }
      m.tags[name] = std::move(facets);
    }
    m.degree = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    auto nkx = detail::read_pod<std::uint32_t>(is);
    m.knots_x.resize(nkx);
    for (auto& k : m.knots_x) k = detail::read_pod<double>(is);
    auto nky = detail::read_pod<std::uint32_t>(is);
    m.knots_y.resize(nky);
    for (auto& k : m.knots_y) k = detail::read_pod<double>(is);
    auto ncells = detail::read_pod<std::uint32_t>(is);
    m.cell_elem.resize(ncells);
    for (auto& c : m.cell_elem) c = static_cast<int>(detail::read_pod<std::int32_t>(is));
    return m;
  }
};

// One boundary quadrature point: physical position, weight (arc length
// scaled), outward unit normal in the mesh's own coordinates, and the facet
// it came from.
struct BoundaryQP {
  Eigen::Vector2d x;
  double w = 0;
  Eigen::Vector2d normal{0, 0};
  Facet facet;
  Eigen::Vector2d xi{0, 0};  // element reference coordinates
};

inline std::vector<BoundaryQP> boundary_quadrature(const Mesh& mesh, const std::string& tag,
                                                   int npts = 3) {
  auto it = mesh.tags.find(tag);
  if (it == mesh.tags.end() || it->second.empty())
    throw std::runtime_error("boundary_quadrature: empty or missing tag '" + tag + "'");
  std::vector<BoundaryQP> out;
  if (mesh.dim == 1) {
    for (const Facet& f : it->second) {
      BoundaryQP qp;
      qp.facet = f;
      const int local = f.edge == 0 ? 0 : mesh.degree;
      qp.x[0] = mesh.nodes(mesh.conn(f.elem, local), 0);
      qp.x[1] = 0;
      qp.w = 1.0;
      qp.normal = Eigen::Vector2d(f.edge == 0 ? -1.0 : 1.0, 0.0);
      qp.xi[0] = f.edge == 0 ? -1.0 : 1.0;
      out.push_back(qp);
    }
    return out;
  }
  const GaussRule g = gauss_rule(npts);
  const int p = mesh.degree;
  for (const Facet& f : it->second) {
    const auto locals = mesh.edge_locals(f.edge);
    for (int k = 0; k < npts; ++k) {
      const double s = g.pts[k];
      Eigen::VectorXd L, dL;
      shape1d(p, s, L);
      shape1d_grad(p, s, dL);
      Eigen::Vector2d x = Eigen::Vector2d::Zero(), t = Eigen::Vector2d::Zero();
      for (int a = 0; a <= p; ++a) {
        const Eigen::Vector2d xa = mesh.nodes.row(mesh.conn(f.elem, locals[a])).transpose();
        x += L[a] * xa;
        t += dL[a] * xa;
      }
      BoundaryQP qp;
      qp.facet = f;
      qp.x = x;
      qp.w = g.wts[k] * t.norm();
      Eigen::Vector2d n(t[1], -t[0]);
      if (f.edge == 2 || f.edge == 3) n = -n;
      qp.normal = n.normalized();
      switch (f.edge) {
        case 0: qp.xi = {s, -1.0}; break;
        case 1: qp.xi = {1.0, s}; break;
        case 2: qp.xi = {s, 1.0}; break;
        default: qp.xi = {-1.0, s}; break;
      }
      out.push_back(qp);
    }
  }
  return out;
}

// Geometric refinement toward selected knots: the intervals adjacent to each
// point are bisected `levels` times, clustering mesh lines at boundary-layer
// or corner-singularity locations without losing the tensor structure.
inline void grade_knots(std::vector<double>& knots, const std::vector<double>& points,
                        int levels) {
  for (int lev = 0; lev < levels; ++lev) {
    std::vector<double> add;
    for (double p : points) {
      auto it = std::lower_bound(knots.begin(), knots.end(), p - 1e-14);
      if (it == knots.end() || std::abs(*it - p) > 1e-12) continue;
      const std::size_t k = static_cast<std::size_t>(it - knots.begin());
      if (k > 0) add.push_back(0.5 * (knots[k - 1] + p));
      if (k + 1 < knots.size()) add.push_back(0.5 * (p + knots[k + 1]));
    }
    knots.insert(knots.end(), add.begin(), add.end());
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end(),
                            [](double u, double v) { return std::abs(u - v) < 1e-14; }),
                knots.end());
  }
}

// Uniformly spaced knot vector refined so that every entry of `must` appears
// exactly (used to align traction regions, material bands and notch columns
// with mesh lines).
inline std::vector<double> knots_with_breaks(double a, double b, double target_h,
                                             std::vector<double> must = {}) {
  must.push_back(a);
  must.push_back(b);
  std::sort(must.begin(), must.end());
  must.erase(std::unique(must.begin(), must.end(),
                         [](double u, double v) { return std::abs(u - v) < 1e-14; }),
             must.end());
  std::vector<double> knots;
  for (std::size_t i = 0; i + 1 < must.size(); ++i) {
    const double lo = must[i], hi = must[i + 1];
    if (hi <= a - 1e-14 || lo >= b + 1e-14) continue;
    const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / target_h - 1e-12)));
    for (int k = 0; k < n; ++k) knots.push_back(lo + (hi - lo) * k / n);
  }
  knots.push_back(must.back());
  return knots;
}

}  // namespace os2

#endif  // OS2_MESH_HPP
