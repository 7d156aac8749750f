#ifndef OS2_BASIS_HPP
#define OS2_BASIS_HPP

#include <Eigen/Dense>

#include <cassert>
#include <stdexcept>
#include <vector>

// Gauss-Legendre rules on [-1,1] and tensor-product Lagrange bases of
// degree 1 and 2 (equispaced nodes -1, [0,] 1).

namespace os2 {

struct GaussRule {
  std::vector<double> pts;
  std::vector<double> wts;
};

inline GaussRule gauss_rule(int n) {
  GaussRule r;
  switch (n) {
    case 1:
      r.pts = {0.0};
      r.wts = {2.0};
      break;
    case 2: {
      const double a = 0.57735026918962576451;  // 1/sqrt(3)
      r.pts = {-a, a};
      r.wts = {1.0, 1.0};
      break;
    }
    case 3: {
      const double a = 0.77459666924148337704;  // sqrt(3/5)
      r.pts = {-a, 0.0, a};
      r.wts = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      break;
    }
    case 4: {
      const double a = 0.33998104358485626480;
      const double b = 0.86113631159405257522;
      const double wa = 0.65214515486254614263;
      const double wb = 0.34785484513745385737;
      r.pts = {-b, -a, a, b};
      r.wts = {wb, wa, wa, wb};
      break;
    }
    case 5: {
      const double a = 0.53846931010568309104;
      const double b = 0.90617984593866399280;
      const double wa = 0.47862867049936646804;
      const double wb = 0.23692688505618908751;
      r.pts = {-b, -a, 0.0, a, b};
      r.wts = {wb, wa, 128.0 / 225.0, wa, wb};
      break;
    }
    default:
      throw std::invalid_argument("gauss_rule: unsupported point count");
  }
  return r;
}

// 1d Lagrange basis of degree p on nodes -1(,0),1. i in [0,p].
inline double lagrange1d(int p, int i, double x) {
  if (p == 1) return i == 0 ? 0.5 * (1.0 - x) : 0.5 * (1.0 + x);
  assert(p == 2);
  switch (i) {
    case 0: return 0.5 * x * (x - 1.0);
    case 1: return 1.0 - x * x;
    default: return 0.5 * x * (x + 1.0);
  }
}

inline double lagrange1d_deriv(int p, int i, double x) {
  if (p == 1) return i == 0 ? -0.5 : 0.5;
  assert(p == 2);
  switch (i) {
    case 0: return x - 0.5;
    case 1: return -2.0 * x;
    default: return x + 0.5;
  }
}

// Tensor-product shape functions on [-1,1]^2 with lexicographic local
// numbering l = (p+1)*b + a, a the x-index and b the y-index.
inline void shape2d(int p, const Eigen::Vector2d& xi, Eigen::VectorXd& N) {
  const int q = p + 1;
  N.resize(q * q);
  for (int b = 0; b < q; ++b)
    for (int a = 0; a < q; ++a)
      N[q * b + a] = lagrange1d(p, a, xi[0]) * lagrange1d(p, b, xi[1]);
}

inline void shape2d_grad(int p, const Eigen::Vector2d& xi, Eigen::MatrixXd& dN) {
  const int q = p + 1;
  dN.resize(q * q, 2);
  for (int b = 0; b < q; ++b)
    for (int a = 0; a < q; ++a) {
      dN(q * b + a, 0) = lagrange1d_deriv(p, a, xi[0]) * lagrange1d(p, b, xi[1]);
      dN(q * b + a, 1) = lagrange1d(p, a, xi[0]) * lagrange1d_deriv(p, b, xi[1]);
    }
}

inline void shape1d(int p, double xi, Eigen::VectorXd& N) {
  N.resize(p + 1);
  for (int a = 0; a <= p; ++a) N[a] = lagrange1d(p, a, xi);
}

inline void shape1d_grad(int p, double xi, Eigen::VectorXd& dN) {
  dN.resize(p + 1);
  for (int a = 0; a <= p; ++a) dN[a] = lagrange1d_deriv(p, a, xi);
}

}  // namespace os2

#endif  // OS2_BASIS_HPP
