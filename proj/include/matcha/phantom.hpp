#pragma once

// Synthetic test volumes, voxel-space rotation and noise injection.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "matcha/errors.hpp"
#include "matcha/so3.hpp"
#include "matcha/volume.hpp"

namespace matcha {

struct Blob {
  Vec3 center;
  Mat3 precision;  // inverse covariance
  double amplitude = 1.0;
};

struct PhantomOptions {
  int blobs = 6;
  double max_center_radius = 0.6;
  double min_width = 0.05;
  double max_width = 0.2;
  // smooth radial taper: 1 up to taper_start, cos^2 roll-off to 0 at taper_end
  double taper_start = 0.75;
  double taper_end = 0.95;
};

/// Sum of anisotropic Gaussian blobs under a smooth radial taper. The field is
/// defined analytically, so it can be rendered at any pose without interpolation.
struct Phantom {
  std::uint64_t seed = 0;
  PhantomOptions options;
  std::vector<Blob> blobs;
  Volume volume;

  double taper(double r) const {
    if (r <= options.taper_start) return 1.0;
    if (r >= options.taper_end) return 0.0;
    const double c = std::cos(0.5 * kPi * (r - options.taper_start) / (options.taper_end - options.taper_start));
    return c * c;
  }

  double eval(const Vec3& x) const {
    const double t = taper(x.norm());
    if (t == 0.0) return 0.0;
    double s = 0;
    for (const Blob& b : blobs) {
      const Vec3 d = x - b.center;
      s += b.amplitude * std::exp(-0.5 * d.dot(b.precision * d));
    }
    return t * s;
  }

  /// Render x -> h(R^T x - shift), shift given in voxels of an n-grid.
  Volume render(int n, const RotationMatrix& r = RotationMatrix(), const Vec3& shift = Vec3::Zero()) const {
    const Mat3 rt = r.matrix().transpose();
    const Vec3 s = shift * (2.0 / n);
    return sample(n, [&](const Vec3& x) { return eval(rt * x - s); });
  }
};

inline Phantom make_phantom(std::uint64_t seed, int n, const PhantomOptions& opt = {}) {
  if (n < 16) throw ConfigError("phantom grid must be at least 16");
  if (opt.blobs < 3) throw ConfigError("phantom needs at least 3 blobs");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Phantom p;
  p.seed = seed;
  p.options = opt;
  const Mat3 quarter[3] = {exp_so3({kPi / 2, 0, 0}).matrix(), exp_so3({0, kPi / 2, 0}).matrix(),
                           exp_so3({0, 0, kPi / 2}).matrix()};
  for (int attempt = 0; attempt < 100; ++attempt) {
    p.blobs.clear();
    for (int b = 0; b < opt.blobs; ++b) {
      Vec3 c;
      do {
        c = Vec3(2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1) * opt.max_center_radius;
      } while (c.norm() > opt.max_center_radius);
      Vec3 w;
      for (int a = 0; a < 3; ++a) w[a] = opt.min_width + (opt.max_width - opt.min_width) * u(rng);
      const Mat3 rot = random_rotation(rng).matrix();
      const Mat3 prec = rot * w.cwiseInverse().cwiseAbs2().asDiagonal() * rot.transpose();
      p.blobs.push_back({c, prec, 0.5 + 0.5 * u(rng)});
    }
    p.volume = p.render(n);
    // asymmetry guard against the quarter turns about the coordinate axes
    const double self = squared_norm(p.volume);
    bool symmetric = false;
    for (const Mat3& q : quarter)
      if (dot(p.render(n, RotationMatrix::unchecked(q)), p.volume) >= 0.9 * self) symmetric = true;
    if (!symmetric) return p;
  }
  throw NumericError("could not draw an asymmetric phantom");
}

/// Trilinear interpolation of v at physical point x; zero outside the grid.
inline double interpolate(const Volume& v, const Vec3& x) {
  const int n = v.n();
  double f[3];
  int i0[3];
  for (int a = 0; a < 3; ++a) {
    const double g = x[a] * (0.5 * n) + 0.5 * n - 0.5;  // inverse of coord()
    const double fl = std::floor(g);
    i0[a] = int(fl);
    f[a] = g - fl;
  }
  double s = 0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const int i = i0[0] + di, j = i0[1] + dj, k = i0[2] + dk;
        if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) continue;
        const double w = (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) * (dk ? f[2] : 1 - f[2]);
        s += w * v(i, j, k);
      }
  return s;
}

/// (g.v)(x) = v(g^{-1} x) by trilinear interpolation, zero outside the unit ball.
inline Volume rotate_volume(const Volume& v, const RotationMatrix& g) {
  const Mat3 gt = g.matrix().transpose();
  Volume out(v.n());
  const int n = v.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (out.radius_from_key(out.radius_key(i, j, k)) > 1.0) continue;
        out(i, j, k) = interpolate(v, gt * out.position(i, j, k));
      }
  return out;
}

inline Volume rotate_volume(const Volume& v, const EulerZYZ& g) { return rotate_volume(v, euler_to_matrix(g)); }

/// v + eta with i.i.d. Gaussian eta rescaled so that 10 log10(|v|^2/|eta|^2) = snr_db.
/// snr_db = +inf returns v unchanged.
inline Volume add_noise(const Volume& v, double snr_db, std::uint64_t seed) {
  const double sig = squared_norm(v);
  if (sig == 0.0) throw ZeroSignal("cannot set an SNR relative to a zero volume");
  if (std::isinf(snr_db) && snr_db > 0) return v;
  if (!std::isfinite(snr_db)) throw ConfigError("SNR must be finite or +inf");
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> eta(v.size());
  double e2 = 0;
  for (double& e : eta) {
    e = nd(rng);
    e2 += e * e;
  }
  const double scale = std::sqrt(sig * std::pow(10.0, -snr_db / 10.0) / e2);
  Volume out = v;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * eta[i];
  return out;
}

}  // namespace matcha
