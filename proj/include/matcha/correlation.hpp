#pragma once

// Band-limited rotational correlation
//   C_L(g) = sum_{l<=L} sum_{m,m'} sigma_{lmm'} D^l_{mm'}(g),
//   sigma_{lmm'} = sum_k f_{klm} conj(h_{klm'}),
// with value, gradient and Hessian in the Euler chart and in body-frame coordinates.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <string>
#include <vector>

#include "matcha/ball_harmonics.hpp"
#include "matcha/errors.hpp"
#include "matcha/wigner.hpp"

namespace matcha {

struct SigmaBlocks {
  int l_max = -1;
  std::vector<CMatX> blocks;  // blocks[l] is (2l+1)x(2l+1), entry (m+l, m'+l)
  std::string provenance;
  bool real_valued = false;  // C is real for every rotation (both inputs real)

  const CMatX& operator[](int l) const { return blocks[l]; }
  double frobenius_sum(int L) const {
    double s = 0;
    for (int l = 0; l <= L; ++l) s += blocks[l].norm();
    return s;
  }
};

struct CorrelationEval {
  double value = 0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
};

namespace detail {

inline void check_cutoff(const SigmaBlocks& s, int L) {
  if (L < 0 || L > s.l_max)
    throw CutoffExceedsBlocks("cutoff " + std::to_string(L) + " outside blocks of degree " +
                              std::to_string(s.l_max));
}

/// sigma_{-m,-m'} = (-1)^(m+m') conj(sigma_{mm'}) makes C real everywhere.
inline bool has_real_symmetry(const std::vector<CMatX>& blocks, double tol) {
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const int L = int(l), n = 2 * L + 1;
    const double scale = std::max(1.0, blocks[l].cwiseAbs().maxCoeff());
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const double sg = ((a + b) % 2 == 0) ? 1.0 : -1.0;  // (-1)^(m+m'), 2L even
        if (std::abs(blocks[l](n - 1 - a, n - 1 - b) - sg * std::conj(blocks[l](a, b))) > tol * scale)
          return false;
      }
  }
  return true;
}

}  // namespace detail

inline SigmaBlocks make_sigma(std::vector<CMatX> blocks, std::string provenance = "user") {
  SigmaBlocks s;
  s.l_max = int(blocks.size()) - 1;
  for (int l = 0; l <= s.l_max; ++l)
    if (blocks[l].rows() != 2 * l + 1 || blocks[l].cols() != 2 * l + 1)
      throw ConfigError("sigma block " + std::to_string(l) + " has the wrong shape");
  s.real_valued = detail::has_real_symmetry(blocks, 1e-9);
  s.blocks = std::move(blocks);
  s.provenance = std::move(provenance);
  return s;
}

/// A_l = sum_{k in K_l} f_{lk} h_{lk}^H for l <= L_max (L_max < 0: all degrees).
inline SigmaBlocks compute_sigma(const BallCoefficients& fc, const BallCoefficients& hc, int L_max = -1,
                                 std::string provenance = "f,h") {
  if (!fc.truncation || !hc.truncation || !fc.truncation->same_as(*hc.truncation))
    throw TruncationMismatch("coefficient sets use different truncations");
  const TruncationIndex& t = *fc.truncation;
  if (L_max < 0) L_max = t.l_max();
  if (L_max > t.l_max())
    throw CutoffExceedsBlocks("requested degree " + std::to_string(L_max) +
                              " exceeds truncation degree " + std::to_string(t.l_max()));
  std::vector<CMatX> blocks(L_max + 1);
  for (int l = 0; l <= L_max; ++l) {
    blocks[l] = CMatX::Zero(2 * l + 1, 2 * l + 1);
    for (int k = 1; k <= t.K(l); ++k) blocks[l].noalias() += fc.shell(l, k) * hc.shell(l, k).adjoint();
  }
  return make_sigma(std::move(blocks), std::move(provenance));
}

/// Complex sum_{l<=L} sum sigma D; the real part is C_L.
inline cdouble eval_CL_complex(const SigmaBlocks& s, int L, const EulerZYZ& e) {
  detail::check_cutoff(s, L);
  const auto d = little_d_all(L, e.beta());
  const CVecX pa = detail::phase_vector(L, e.alpha()), pg = detail::phase_vector(L, e.gamma());
  cdouble sum = 0;
  for (int l = 0; l <= L; ++l) {
    const int n = 2 * l + 1, o = L - l;
    const CMatX& A = s.blocks[l];
    for (int a = 0; a < n; ++a) {
      cdouble row = 0;
      for (int b = 0; b < n; ++b) row += A(a, b) * d[l].d(a, b) * pg[o + b];
      sum += pa[o + a] * row;
    }
  }
  return sum;
}

inline double eval_CL(const SigmaBlocks& s, int L, const EulerZYZ& e) {
  const cdouble c = eval_CL_complex(s, L, e);
  if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw NumericError("non-finite correlation value");
  if (s.real_valued && std::abs(c.imag()) > 1e-8 * std::max(1.0, s.frobenius_sum(L)))
    throw NumericError("correlation has a significant imaginary part");
  return c.real();
}

inline std::vector<double> eval_CL_batch(const SigmaBlocks& s, int L, const std::vector<EulerZYZ>& es) {
  std::vector<double> out(es.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < long(es.size()); ++i) out[i] = eval_CL(s, L, es[i]);
  return out;
}

/// Value, Euler-chart gradient (d/dalpha, d/dbeta, d/dgamma) and Hessian.
inline CorrelationEval eval_CL_full(const SigmaBlocks& s, int L, const EulerZYZ& e) {
  detail::check_cutoff(s, L);
  const auto d = little_d_all(L, e.beta());
  const CVecX pa = detail::phase_vector(L, e.alpha()), pg = detail::phase_vector(L, e.gamma());
  // accumulators: v, a, b, g, aa, bb, gg, ab, ag, bg
  cdouble acc[10] = {};
  for (int l = 0; l <= L; ++l) {
    const int n = 2 * l + 1, o = L - l;
    const MatX& d0 = d[l].d;
    const MatX d1 = apply_ladder(d0, l);
    const MatX d2 = apply_ladder(d1, l);
    const CMatX& A = s.blocks[l];
    for (int a = 0; a < n; ++a) {
      const double m = a - l;
      for (int b = 0; b < n; ++b) {
        const double mp = b - l;
        const cdouble p = A(a, b) * pa[o + a] * pg[o + b];
        const cdouble p0 = p * d0(a, b), p1 = p * d1(a, b);
        acc[0] += p0;
        acc[1] += cdouble(0, -m) * p0;
        acc[2] += p1;
        acc[3] += cdouble(0, -mp) * p0;
        acc[4] += -m * m * p0;
        acc[5] += p * d2(a, b);
        acc[6] += -mp * mp * p0;
        acc[7] += cdouble(0, -m) * p1;
        acc[8] += -m * mp * p0;
        acc[9] += cdouble(0, -mp) * p1;
      }
    }
  }
  CorrelationEval r;
  r.value = acc[0].real();
  r.gradient = Vec3(acc[1].real(), acc[2].real(), acc[3].real());
  r.hessian << acc[4].real(), acc[7].real(), acc[8].real(), acc[7].real(), acc[5].real(), acc[9].real(),
      acc[8].real(), acc[9].real(), acc[6].real();
  if (!std::isfinite(r.value) || !r.gradient.allFinite() || !r.hessian.allFinite())
    throw NumericError("non-finite correlation derivatives");
  return r;
}

/// Value, gradient and Hessian of w -> C_L(g exp([w]_x)) at w = 0 (body-frame
/// coordinates; the gradient norm and Hessian spectrum are chart-independent).
inline CorrelationEval eval_CL_intrinsic(const SigmaBlocks& s, int L, const EulerZYZ& e) {
  detail::check_cutoff(s, L);
  CorrelationEval r;
  for (int l = 0; l <= L; ++l) {
    const CMatX q = s.blocks[l].transpose() * wigner_D(l, e).D;  // Re tr(q X) = Re sum sigma (D X)
    CMatX qt[3], t[3];
    for (int i = 0; i < 3; ++i) {
      t[i] = lie_generator(l, i);
      qt[i] = q * t[i];
    }
    r.value += q.trace().real();
    for (int i = 0; i < 3; ++i) {
      r.gradient[i] += qt[i].trace().real();
      for (int j = 0; j <= i; ++j) {
        const double h = 0.5 * ((qt[i] * t[j]).trace().real() + (qt[j] * t[i]).trace().real());
        r.hessian(i, j) += h;
        if (i != j) r.hessian(j, i) += h;
      }
    }
  }
  return r;
}

/// Smallest k with s_{k+1}/s_k < rho; the full dimension if the spectrum has no such gap.
inline int effective_rank(const CMatX& A, double rho) {
  if (!(rho > 0 && rho < 1)) throw ConfigError("effective_rank: rho must lie in (0,1)");
  const Eigen::VectorXd sv = Eigen::JacobiSVD<CMatX>(A).singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  for (int k = 1; k < sv.size(); ++k)
    if (sv[k] / sv[k - 1] < rho) return k;
  return int(sv.size());
}

/// Number of singular values above tol * s_1.
inline int numerical_rank(const CMatX& A, double tol = 1e-10) {
  const Eigen::VectorXd sv = Eigen::JacobiSVD<CMatX>(A).singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  int r = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv[k] > tol * sv[0]) ++r;
  return r;
}

/// Blocks replaced by their truncated SVD at the effective rank for threshold rho.
inline SigmaBlocks low_rank_approx(const SigmaBlocks& s, double rho) {
  std::vector<CMatX> out(s.blocks.size());
  for (std::size_t l = 0; l < s.blocks.size(); ++l) {
    const int r = effective_rank(s.blocks[l], rho);
    Eigen::JacobiSVD<CMatX> svd(s.blocks[l], Eigen::ComputeThinU | Eigen::ComputeThinV);
    out[l] = svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
             svd.matrixV().leftCols(r).adjoint();
  }
  SigmaBlocks c = make_sigma(std::move(out), s.provenance + "+lowrank");
  return c;
}

}  // namespace matcha
