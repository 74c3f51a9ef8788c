#pragma once

// FFT translation estimation and the alternating rotation/translation loop.
//
// Shifts are in voxels along the storage axes (x from i, y from j, z from k) and act
// as (S_t v)(x) = v(x - t), periodically on the grid.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <array>
#include <chrono>
#include <cmath>
#include <memory>
#include <vector>

#include "matcha/ball_harmonics.hpp"
#include "matcha/fft.hpp"
#include "matcha/phantom.hpp"
#include "matcha/refine.hpp"
#include "matcha/volume.hpp"

namespace matcha {

struct Shift3 {
  double tx = 0, ty = 0, tz = 0;

  Vec3 vec() const { return {tx, ty, tz}; }
  static Shift3 from(const Vec3& v) { return {v[0], v[1], v[2]}; }
  double operator[](int a) const { return a == 0 ? tx : a == 1 ? ty : tz; }
  friend bool operator==(const Shift3&, const Shift3&) = default;
};

enum class SubpixelMode { None, Quadratic, Upsampled };

namespace detail {

inline int signed_freq(int k, int n) { return k <= n / 2 ? k : k - n; }

inline void volume_fft(const Volume& v, FftBuffer& buf, const FftPlan& plan) {
  for (std::size_t i = 0; i < v.size(); ++i) buf[i] = v[i];
  plan.execute(buf);
}

/// Per-axis shift factors e^{-2 pi i k t / N}; the Nyquist bin of an even grid gets
/// (-1)^round(t), which keeps real inputs real, the ramp unitary and S_{-t} = S_t^{-1}.
inline std::vector<cdouble> shift_factors(int n, double t) {
  std::vector<cdouble> f(n);
  for (int k = 0; k < n; ++k) {
    if (n % 2 == 0 && k == n / 2)
      f[k] = std::fmod(std::abs(std::round(t)), 2.0) == 0.0 ? 1.0 : -1.0;
    else
      f[k] = std::polar(1.0, -kTwoPi * signed_freq(k, n) * t / n);
  }
  return f;
}

}  // namespace detail

/// Circular roll by integer voxels: out[i] = v[i - t].
inline Volume roll(const Volume& v, int sx, int sy, int sz) {
  const int n = v.n();
  Volume out(n);
  auto w = [n](int a) { return ((a % n) + n) % n; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out(w(i + sx), w(j + sy), w(k + sz)) = v(i, j, k);
  return out;
}

/// (S_t v)(x) = v(x - t) by a Fourier phase ramp (periodic). apply_shift uses the
/// equivalent circular roll for integer t so the result is exact.
inline Volume phase_shift(const Volume& v, const Shift3& t) {
  const int n = v.n();
  const std::size_t total = v.size();
  FftBuffer buf(total);
  const FftPlan fwd({n, n, n}, FFTW_FORWARD), inv({n, n, n}, FFTW_BACKWARD);
  detail::volume_fft(v, buf, fwd);
  const auto fx = detail::shift_factors(n, t.tx), fy = detail::shift_factors(n, t.ty),
             fz = detail::shift_factors(n, t.tz);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cdouble fij = fx[i] * fy[j];
      for (int k = 0; k < n; ++k) buf[(std::size_t(i) * n + j) * n + k] *= fij * fz[k];
    }
  inv.execute(buf);
  Volume out(n);
  const double scale = 1.0 / double(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = buf[i].real() * scale;
  return out;
}

inline Volume apply_shift(const Volume& v, const Shift3& t) {
  if (t == Shift3{}) return v;
  if (t.tx == std::round(t.tx) && t.ty == std::round(t.ty) && t.tz == std::round(t.tz))
    return roll(v, int(t.tx), int(t.ty), int(t.tz));
  return phase_shift(v, t);
}

struct ShiftEstimate {
  Shift3 shift;
  Shift3 integer;  // window argmax before subpixel refinement
  double peak = 0;
};

namespace detail {

/// c(t) = sum_k X(k) e^{2 pi i k.t / N} / N^3 on the grid t = center + d/up, |d| <= 1.5 up,
/// by three separable matrix products (band-limited interpolation of the correlation).
inline Vec3 upsampled_peak(const FftBuffer& x, int n, const Vec3& center, int up) {
  const int half = int(std::ceil(1.5 * up));
  const int m = 2 * half + 1;
  auto kernel = [&](double c0) {
    CMatX e(m, n);
    for (int p = 0; p < m; ++p) {
      const double t = c0 + double(p - half) / up;
      for (int k = 0; k < n; ++k) e(p, k) = std::polar(1.0, kTwoPi * signed_freq(k, n) * t / n);
    }
    return e;
  };
  const CMatX ex = kernel(center[0]), ey = kernel(center[1]), ez = kernel(center[2]);
  // contract z: A[(i,j), r] = sum_k X[i,j,k] ez[r,k]
  Eigen::Map<const Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      x.data(), Eigen::Index(n) * n, n);
  const CMatX A = X * ez.transpose();  // (n*n) x m
  // contract y: B[i, q, r]
  std::vector<CMatX> B(n);
  for (int i = 0; i < n; ++i) B[i] = ey * A.middleRows(Eigen::Index(i) * n, n);  // m(q) x m(r)
  double best = -1e300;
  Vec3 arg = center;
  for (int p = 0; p < m; ++p) {
    CMatX acc = CMatX::Zero(m, m);
    for (int i = 0; i < n; ++i) acc += ex(p, i) * B[i];
    for (int q = 0; q < m; ++q)
      for (int r = 0; r < m; ++r)
        if (acc(q, r).real() > best) {
          best = acc(q, r).real();
          arg = center + Vec3(p - half, q - half, r - half) / double(up);
        }
  }
  return arg;
}

inline double quadratic_offset(double cm, double c0, double cp) {
  const double den = cm - 2 * c0 + cp;
  if (!(den < 0)) return 0.0;
  return std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
}

}  // namespace detail

/// Shift t with h ~ S_t f: argmax of the circular cross-correlation c(t) = sum_x f(x) h(x + t)
/// over |t_a| <= window, then subpixel refinement. window < 0 means N/4.
inline ShiftEstimate estimate_shift(const Volume& f, const Volume& h, int window = -1,
                                    SubpixelMode mode = SubpixelMode::Quadratic, int upsample = 20) {
  if (f.n() != h.n()) throw ConfigError("volumes must share the grid size");
  const int n = f.n();
  if (window < 0) window = n / 4;
  if (window > n / 4) throw WindowTooLarge("shift window " + std::to_string(window) + " exceeds N/4 = " +
                                           std::to_string(n / 4));
  const std::size_t total = f.size();
  const FftPlan fwd({n, n, n}, FFTW_FORWARD), inv({n, n, n}, FFTW_BACKWARD);
  FftBuffer F(total), H(total);
  detail::volume_fft(f, F, fwd);
  detail::volume_fft(h, H, fwd);
  FftBuffer X(total);
  for (std::size_t i = 0; i < total; ++i) X[i] = H[i] * std::conj(F[i]);
  FftBuffer C(total);
  for (std::size_t i = 0; i < total; ++i) C[i] = X[i];
  inv.execute(C);
  const double scale = 1.0 / double(total);
  auto w = [n](int a) { return ((a % n) + n) % n; };
  auto c = [&](int a, int b, int d) { return C[(std::size_t(w(a)) * n + w(b)) * n + w(d)].real() * scale; };

  ShiftEstimate est;
  double best = -1e300;
  int bi = 0, bj = 0, bk = 0;
  for (int a = -window; a <= window; ++a)
    for (int b = -window; b <= window; ++b)
      for (int d = -window; d <= window; ++d) {
        const double v = c(a, b, d);
        if (v > best) {
          best = v;
          bi = a;
          bj = b;
          bk = d;
        }
      }
  est.integer = {double(bi), double(bj), double(bk)};
  est.peak = best;
  est.shift = est.integer;
  if (mode == SubpixelMode::Quadratic) {
    // per-axis 3-point fits give gradient and curvature; the mixed 4-point differences
    // remove the bias of a tilted peak when the resulting Hessian is negative definite
    const std::array<int, 3> b0{bi, bj, bk};
    auto at = [&](int da, int db, int dc) { return c(bi + da, bj + db, bk + dc); };
    auto off = [](int axis, int s) {
      std::array<int, 3> o{0, 0, 0};
      o[axis] = s;
      return o;
    };
    Vec3 g, sep;
    Mat3 Hc = Mat3::Zero();
    for (int a = 0; a < 3; ++a) {
      const auto m = off(a, -1), p = off(a, 1);
      const double cm = at(m[0], m[1], m[2]), cp = at(p[0], p[1], p[2]);
      g[a] = 0.5 * (cp - cm);
      Hc(a, a) = cm - 2 * best + cp;
      sep[a] = detail::quadratic_offset(cm, best, cp);
    }
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        auto corner = [&](int sa, int sb) {
          std::array<int, 3> o{0, 0, 0};
          o[a] = sa;
          o[b] = sb;
          return at(o[0], o[1], o[2]);
        };
        Hc(a, b) = Hc(b, a) = 0.25 * (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1));
      }
    Vec3 d = sep;
    if (Eigen::SelfAdjointEigenSolver<Mat3>(Hc).eigenvalues().maxCoeff() < 0) {
      const Vec3 full = -Hc.ldlt().solve(g);
      if (full.allFinite() && full.cwiseAbs().maxCoeff() <= 0.5) d = full;
    }
    est.shift = Shift3::from(Vec3(b0[0], b0[1], b0[2]) + d);
  } else if (mode == SubpixelMode::Upsampled) {
    if (upsample < 2) throw ConfigError("upsampling factor must be >= 2");
    est.shift = Shift3::from(detail::upsampled_peak(X, n, est.integer.vec(), upsample));
  }
  return est;
}

struct PoseResult {
  EulerZYZ rotation;
  Shift3 shift;
  std::vector<double> score_history;  // 6D score after each outer iteration
  std::vector<AlignmentResult> rotations;
  int iterations = 0;
  double wall_time = 0;
};

struct AlternationOptions {
  int T = 3;
  int window = -1;  // < 0: N/4
  SubpixelMode subpixel = SubpixelMode::Quadratic;
};

/// Energy centroid of v in voxels relative to the grid centre.
inline Vec3 energy_centroid(const Volume& v) {
  const int n = v.n();
  Vec3 m = Vec3::Zero();
  double w = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double e = v(i, j, k) * v(i, j, k);
        m += e * Vec3(i, j, k);
        w += e;
      }
  if (w == 0.0) return Vec3::Zero();
  return m / w - Vec3::Constant(0.5 * (n - 1));
}

/// Block-coordinate ascent on C(g, tau) = <f, g.S_tau h>. Rotations act about the template's
/// energy centroid c: with h_c = S_{-c} h and p = g(tau + c) the position of that centre in
/// the frame of f, C = <S_{-p} f, g.h_c>, which keeps the two blocks nearly decoupled. The
/// tracked score is C_{L_J} of (S_{-p} f, h_c) in coefficient space. The first rotation is
/// matcha on (f, h) (tau = 0); later rotation steps run matcha on (S_{-p} f, h_c) with p
/// fixed; the translation step takes p from the FFT correlation of g.h_c (trilinear
/// rotation) with f, then polishes each axis with a 3-point parabola on the tracked score.
/// Proposals that lower the score are halved once (FFT step) or rejected.
inline PoseResult alternate_align(const Volume& f, const Volume& h, const Schedule& sched,
                                  const std::shared_ptr<const TruncationIndex>& t,
                                  const AlternationOptions& opt = {}) {
  if (f.n() != h.n()) throw ConfigError("volumes must share the grid size");
  if (opt.T < 1) throw ConfigError("T must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<int> bands = usable_bands(sched, t->l_max());
  const int LJ = bands.back();
  const Vec3 c = energy_centroid(h);
  const Volume hcen = apply_shift(h, Shift3::from(-c));
  const BallCoefficients hc = forward_transform(hcen, t);

  auto particle_coeffs = [&](const Vec3& p) { return forward_transform(apply_shift(f, Shift3::from(-p)), t); };
  auto score = [&](const BallCoefficients& fc, const EulerZYZ& g) {
    return eval_CL(compute_sigma(fc, hc, LJ), LJ, g);
  };

  PoseResult res;
  AlignmentResult first = matcha(forward_transform(f, t), forward_transform(h, t), sched);
  res.rotation = first.rotation;
  res.rotations.push_back(std::move(first));
  Vec3 p = euler_to_matrix(res.rotation).matrix() * c;
  BallCoefficients fc = particle_coeffs(p);
  double cur = score(fc, res.rotation);
  for (int it = 0; it < opt.T; ++it) {
    const double before = cur;
    // (1) rotation about the template centre, held at p
    if (it > 0) {
      AlignmentResult ar = matcha(fc, hc, sched);
      if (ar.score >= cur) {
        res.rotation = ar.rotation;
        cur = ar.score;
      }
      res.rotations.push_back(std::move(ar));
    }
    // (2) translation for the current rotation
    const Vec3 proposal = estimate_shift(rotate_volume(hcen, res.rotation), f, opt.window, opt.subpixel).shift.vec();
    for (double step : {1.0, 0.5}) {
      const Vec3 cand = p + step * (proposal - p);
      if (cand == p) break;
      BallCoefficients cc = particle_coeffs(cand);
      const double v = score(cc, res.rotation);
      if (v >= cur) {
        p = cand;
        fc = std::move(cc);
        cur = v;
        break;
      }
    }
    // polish p on the tracked score itself: one 3-point parabola per axis
    for (int a = 0; a < 3; ++a) {
      const double d = 0.25;
      Vec3 pm = p, pp = p;
      pm[a] -= d;
      pp[a] += d;
      const double vm = score(particle_coeffs(pm), res.rotation), vp = score(particle_coeffs(pp), res.rotation);
      const Vec3 cand = p + Vec3::Unit(a) * (d * detail::quadratic_offset(vm, cur, vp));
      if (cand == p) continue;
      BallCoefficients cc = particle_coeffs(cand);
      const double v = score(cc, res.rotation);
      if (v >= cur) {
        p = cand;
        fc = std::move(cc);
        cur = v;
      }
    }
    res.score_history.push_back(cur);
    res.iterations = it + 1;
    if (it > 0 && std::abs(cur - before) <= sched.tol.obj * std::abs(cur)) break;
  }
  res.shift = Shift3::from(euler_to_matrix(res.rotation).matrix().transpose() * p - c);
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace matcha
