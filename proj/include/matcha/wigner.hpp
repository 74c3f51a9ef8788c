#pragma once

// Wigner d- and D-matrices with analytic Euler-angle derivatives.
//
// Conventions (fixed across the library):
//   * rows and columns are indexed m, m' = -l..l ascending, entry (m+l, m'+l);
//   * d^l_{mm'}(beta) = <l m| exp(-i beta J_y) |l m'>;
//   * D^l_{mm'}(alpha,beta,gamma) = exp(-i m alpha) d^l_{mm'}(beta) exp(-i m' gamma),
//     so D is a homomorphism: D(g1 g2) = D(g1) D(g2).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "matcha/errors.hpp"
#include "matcha/so3.hpp"

namespace matcha {

using cdouble = std::complex<double>;
using MatX = Eigen::MatrixXd;
using CMatX = Eigen::MatrixXcd;
using CVecX = Eigen::VectorXcd;

inline constexpr int kMaxDegree = 160;

struct LittleDBlock {
  int degree = 0;
  double beta = 0.0;
  MatX d;  // (2l+1) x (2l+1)

  double operator()(int m, int mp) const { return d(m + degree, mp + degree); }
};

struct WignerDBlock {
  int degree = 0;
  EulerZYZ angles;
  CMatX D;

  cdouble operator()(int m, int mp) const { return D(m + degree, mp + degree); }
};

struct WignerDGradient {
  WignerDBlock alpha, beta, gamma;
};

struct WignerDHessian {
  WignerDBlock aa, bb, gg, ab, ag, bg;
};

namespace detail {

inline void check_degree(int l) {
  if (l < 0) throw ConfigError("negative Wigner degree");
  if (l > kMaxDegree)
    throw DegreeTooLarge("Wigner degree " + std::to_string(l) + " exceeds cap " +
                         std::to_string(kMaxDegree));
}

inline double sign_pow(int k) { return (k % 2 == 0) ? 1.0 : -1.0; }

/// d^l_{m,mp}(beta) for l = m..lmax, written to out[l - m]. Requires m >= |mp|.
/// Seeded with the closed form at l = m, then the three-term recurrence in l.
inline void d_sequence(int m, int mp, int lmax, double cos_beta, double c_half, double s_half,
                       double* out) {
  // seed: sqrt((2m)! / ((m+mp)! (m-mp)!)) c^(m+mp) (-s)^(m-mp)
  const int p = m + mp, q = m - mp;
  double seed;
  {
    double logv = 0.5 * (std::lgamma(2.0 * m + 1.0) - std::lgamma(p + 1.0) - std::lgamma(q + 1.0));
    bool zero = false;
    if (p > 0) {
      if (c_half <= 0.0) zero = true; else logv += p * std::log(c_half);
    }
    if (q > 0) {
      if (s_half <= 0.0) zero = true; else logv += q * std::log(s_half);
    }
    seed = zero ? 0.0 : sign_pow(q) * std::exp(logv);
  }
  out[0] = seed;
  if (lmax == m) return;

  const double mm = static_cast<double>(m) * mp;
  double prev = 0.0, cur = seed;
  for (int j = m; j < lmax; ++j) {
    const double jp = j + 1.0;
    const double denom = std::sqrt((jp * jp - double(m) * m) * (jp * jp - double(mp) * mp));
    const double a = jp * (2.0 * j + 1.0) / denom;
    const double shift = (j == 0) ? 0.0 : mm / (double(j) * jp);
    double next = a * (cos_beta - shift) * cur;
    if (j > m) {
      const double b = a * std::sqrt((double(j) * j - double(m) * m) * (double(j) * j - double(mp) * mp)) /
                       (double(j) * (2.0 * j + 1.0));
      next -= b * prev;
    }
    prev = cur;
    cur = next;
    out[j + 1 - m] = cur;
  }
}

}  // namespace detail

/// Little-d blocks for every degree 0..lmax at one beta; O(lmax^3).
inline std::vector<LittleDBlock> little_d_all(int lmax, double beta) {
  detail::check_degree(lmax);
  std::vector<LittleDBlock> blocks(lmax + 1);
  for (int l = 0; l <= lmax; ++l) {
    blocks[l].degree = l;
    blocks[l].beta = beta;
    blocks[l].d = MatX::Zero(2 * l + 1, 2 * l + 1);
  }
  if (beta == 0.0) {
    for (auto& b : blocks) b.d.setIdentity();
    return blocks;
  }
  if (beta == kPi) {
    for (auto& b : blocks) {
      const int l = b.degree;
      for (int m = -l; m <= l; ++m) b.d(m + l, -m + l) = detail::sign_pow(l + m);
    }
    return blocks;
  }
  const double cb = std::cos(beta), ch = std::cos(0.5 * beta), sh = std::sin(0.5 * beta);
  std::vector<double> seq(lmax + 1);
  for (int m = 0; m <= lmax; ++m) {
    for (int mp = -m; mp <= m; ++mp) {
      detail::d_sequence(m, mp, lmax, cb, ch, sh, seq.data());
      const double sgn = detail::sign_pow(m - mp);
      for (int l = m; l <= lmax; ++l) {
        const double v = seq[l - m];
        MatX& d = blocks[l].d;
        d(m + l, mp + l) = v;
        d(mp + l, m + l) = sgn * v;
        d(-m + l, -mp + l) = sgn * v;
        d(-mp + l, -m + l) = v;
      }
    }
  }
  return blocks;
}

inline LittleDBlock little_d(int l, double beta) {
  detail::check_degree(l);
  if (!(beta >= 0.0 && beta <= kPi)) throw ConfigError("little_d: beta outside [0, pi]");
  return std::move(little_d_all(l, beta).back());
}

/// d^l_{m0}(beta) for all l <= lmax and 0 <= m <= l; out[m][l - m].
inline std::vector<std::vector<double>> little_d_column0(int lmax, double beta) {
  std::vector<std::vector<double>> out(lmax + 1);
  const double cb = std::cos(beta), ch = std::cos(0.5 * beta), sh = std::sin(0.5 * beta);
  for (int m = 0; m <= lmax; ++m) {
    out[m].resize(lmax - m + 1);
    detail::d_sequence(m, 0, lmax, cb, ch, sh, out[m].data());
  }
  return out;
}

/// Right multiplication by the J_y ladder generator: returns d * (-i J_y), which is
/// the beta-derivative of d when d = d^l(beta). Real-valued.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> apply_ladder(
    const Eigen::MatrixBase<Derived>& d, int l) {
  using S = typename Derived::Scalar;
  const int n = 2 * l + 1;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>::Zero(d.rows(), n);
  for (int b = -l; b <= l; ++b) {
    const int cb = b + l;
    if (b > -l) {
      const double up = 0.5 * std::sqrt(double(l + b) * double(l - b + 1));
      out.col(cb) += up * d.col(cb - 1);
    }
    if (b < l) {
      const double dn = 0.5 * std::sqrt(double(l - b) * double(l + b + 1));
      out.col(cb) -= dn * d.col(cb + 1);
    }
  }
  return out;
}

/// Lie-algebra generators of the degree-l representation: T = d/dt D(exp(t e_axis)) at t=0,
/// axis 0,1,2 = x,y,z.
inline CMatX lie_generator(int l, int axis) {
  const int n = 2 * l + 1;
  CMatX t = CMatX::Zero(n, n);
  if (axis == 2) {
    for (int m = -l; m <= l; ++m) t(m + l, m + l) = cdouble(0.0, -double(m));
    return t;
  }
  const MatX b = apply_ladder(MatX::Identity(n, n), l);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      if (b(a, c) == 0.0) continue;
      if (axis == 1) {
        t(a, c) = b(a, c);
      } else {
        // T_x = D(r_z(-pi/2)) T_y D(r_z(pi/2)) -> factor i^(a-c)
        const int k = ((a - c) % 4 + 4) % 4;
        static const cdouble ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        t(a, c) = ipow[k] * b(a, c);
      }
    }
  return t;
}

namespace detail {

inline CVecX phase_vector(int l, double angle) {
  CVecX v(2 * l + 1);
  for (int m = -l; m <= l; ++m) v[m + l] = std::polar(1.0, -m * angle);
  return v;
}

inline WignerDBlock assemble(int l, const EulerZYZ& e, const MatX& d, const CVecX& pa,
                             const CVecX& pg, int left_kind = 0, int right_kind = 0) {
  const int n = 2 * l + 1;
  WignerDBlock out{l, e, CMatX(n, n)};
  for (int a = 0; a < n; ++a) {
    const int m = a - l;
    for (int c = 0; c < n; ++c) {
      const int mp = c - l;
      cdouble v = pa[a] * d(a, c) * pg[c];
      for (int k = 0; k < left_kind; ++k) v = cdouble(0.0, -double(m)) * v;
      for (int k = 0; k < right_kind; ++k) v = cdouble(0.0, -double(mp)) * v;
      out.D(a, c) = v;
    }
  }
  return out;
}

}  // namespace detail

inline WignerDBlock wigner_D(int l, const EulerZYZ& e) {
  const LittleDBlock d = little_d(l, e.beta());
  return detail::assemble(l, e, d.d, detail::phase_vector(l, e.alpha()),
                          detail::phase_vector(l, e.gamma()));
}

/// Partial derivatives of D^l with respect to alpha, beta, gamma.
inline WignerDGradient d_wigner_D(int l, const EulerZYZ& e) {
  const LittleDBlock d = little_d(l, e.beta());
  const MatX dd = apply_ladder(d.d, l);
  const CVecX pa = detail::phase_vector(l, e.alpha()), pg = detail::phase_vector(l, e.gamma());
  return {detail::assemble(l, e, d.d, pa, pg, 1, 0), detail::assemble(l, e, dd, pa, pg),
          detail::assemble(l, e, d.d, pa, pg, 0, 1)};
}

/// Second partial derivatives of D^l.
inline WignerDHessian d2_wigner_D(int l, const EulerZYZ& e) {
  const LittleDBlock d = little_d(l, e.beta());
  const MatX dd = apply_ladder(d.d, l);
  const MatX ddd = apply_ladder(dd, l);
  const CVecX pa = detail::phase_vector(l, e.alpha()), pg = detail::phase_vector(l, e.gamma());
  using detail::assemble;
  return {assemble(l, e, d.d, pa, pg, 2, 0), assemble(l, e, ddd, pa, pg),
          assemble(l, e, d.d, pa, pg, 0, 2), assemble(l, e, dd, pa, pg, 1, 0),
          assemble(l, e, d.d, pa, pg, 1, 1), assemble(l, e, dd, pa, pg, 0, 1)};
}

}  // namespace matcha
