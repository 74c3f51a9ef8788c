#pragma once

// Dirichlet ball harmonics on the unit ball.
//
// Basis: psi_{k,l,m}(x) = N_{lk} j_l(lambda_{lk} |x|) conj(Y_lm(x/|x|)), where
// lambda_{lk} is the k-th positive zero of j_l, N_{lk} = sqrt(2) / |j_{l+1}(lambda_{lk})|
// and Y_lm(theta, phi) = sqrt((2l+1)/4pi) e^{i m phi} d^l_{m0}(theta) (Condon-Shortley).
// With this choice, rotating a function by g maps the coefficient vector of each
// (l,k) shell to conj(D^l(g)) times it, and <f, g.h> = sum sigma_{lmm'} D^l_{mm'}(g).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "matcha/errors.hpp"
#include "matcha/volume.hpp"
#include "matcha/wigner.hpp"

namespace matcha {

inline double sph_j(int l, double x) { return std::sph_bessel(unsigned(l), x); }

/// Positive zeros of j_l not exceeding `lambda`, for every l <= l_max. Found by
/// bracketing with the interlacing j_{l,k} < j_{l+1,k} < j_{l,k+1}, starting from
/// the zeros k*pi of j_0, then bisection and a Newton polish.
inline std::vector<std::vector<double>> bessel_roots(int l_max, double lambda) {
  if (l_max < 0) throw ConfigError("bessel_roots: negative l_max");
  const int k0 = int(std::floor(lambda / kPi)) + l_max + 3;
  std::vector<double> level(k0);
  for (int k = 0; k < k0; ++k) level[k] = (k + 1) * kPi;

  std::vector<std::vector<double>> out(l_max + 1);
  for (int l = 0; l <= l_max; ++l) {
    if (l > 0) {
      std::vector<double> next(level.size() - 1);
      for (std::size_t k = 0; k + 1 < level.size(); ++k) {
        double a = level[k], b = level[k + 1];
        double fa = sph_j(l, a);
        for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
          const double c = 0.5 * (a + b);
          const double fc = sph_j(l, c);
          if ((fc < 0) == (fa < 0)) {
            a = c;
            fa = fc;
          } else {
            b = c;
          }
        }
        double x = 0.5 * (a + b);
        // Newton polish: j_l'(x) = (l/x) j_l(x) - j_{l+1}(x)
        for (int it = 0; it < 2; ++it) {
          const double f = sph_j(l, x);
          const double df = l / x * f - sph_j(l + 1, x);
          if (df != 0.0) {
            const double nx = x - f / df;
            if (nx > level[k] && nx < level[k + 1]) x = nx;
          }
        }
        next[k] = x;
      }
      level = std::move(next);
    }
    for (double r : level)
      if (r <= lambda) out[l].push_back(r);
  }
  return out;
}

/// Retained index set I_lambda = {(k,l,m) : lambda_{lk} <= lambda, l <= l_max}.
class TruncationIndex {
 public:
  struct Entry {
    int k, l, m;  // k is 1-based
  };

  TruncationIndex(double lambda, int l_max_cap = -1) : lambda_(lambda) {
    if (!(lambda >= kPi))
      throw EmptyTruncation("frequency budget " + std::to_string(lambda) +
                            " is below the first eigenvalue pi; no basis function retained");
    // j_{l,1} > l, so no degree beyond lambda can contribute
    int cap = int(std::floor(lambda));
    if (l_max_cap >= 0) cap = std::min(cap, l_max_cap);
    roots_ = bessel_roots(cap, lambda);
    while (!roots_.empty() && roots_.back().empty()) roots_.pop_back();
    l_max_ = int(roots_.size()) - 1;
    offsets_.resize(l_max_ + 2, 0);
    norms_.resize(l_max_ + 1);
    for (int l = 0; l <= l_max_; ++l) {
      offsets_[l + 1] = offsets_[l] + int(roots_[l].size()) * (2 * l + 1);
      for (double r : roots_[l]) norms_[l].push_back(std::sqrt(2.0) / std::abs(sph_j(l + 1, r)));
    }
  }

  double lambda() const { return lambda_; }
  int l_max() const { return l_max_; }
  int K(int l) const { return l <= l_max_ ? int(roots_[l].size()) : 0; }
  double root(int l, int k) const { return roots_[l][k - 1]; }
  double norm(int l, int k) const { return norms_[l][k - 1]; }
  const std::vector<std::vector<double>>& roots() const { return roots_; }

  /// Number of retained coefficients.
  int size() const { return offsets_.back(); }
  /// Flat offset of the (l,k) shell; the shell holds m = -l..l contiguously.
  int shell_offset(int l, int k) const { return offsets_[l] + (k - 1) * (2 * l + 1); }
  int index(int k, int l, int m) const { return shell_offset(l, k) + m + l; }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    out.reserve(size());
    for (int l = 0; l <= l_max_; ++l)
      for (int k = 1; k <= K(l); ++k)
        for (int m = -l; m <= l; ++m) out.push_back({k, l, m});
    return out;
  }

  bool same_as(const TruncationIndex& o) const {
    return lambda_ == o.lambda_ && l_max_ == o.l_max_;
  }

 private:
  double lambda_;
  int l_max_ = -1;
  std::vector<std::vector<double>> roots_;
  std::vector<std::vector<double>> norms_;
  std::vector<int> offsets_;
};

inline std::shared_ptr<const TruncationIndex> build_truncation(double lambda, int l_max = -1) {
  return std::make_shared<const TruncationIndex>(lambda, l_max);
}

struct BallCoefficients {
  std::shared_ptr<const TruncationIndex> truncation;
  CVecX values;

  const TruncationIndex& index() const { return *truncation; }
  cdouble operator()(int k, int l, int m) const { return values[truncation->index(k, l, m)]; }
  cdouble& operator()(int k, int l, int m) { return values[truncation->index(k, l, m)]; }
  auto shell(int l, int k) const { return values.segment(truncation->shell_offset(l, k), 2 * l + 1); }
  auto shell(int l, int k) { return values.segment(truncation->shell_offset(l, k), 2 * l + 1); }
};

namespace detail {

/// Radial factors N_{lk} j_l(lambda_{lk} r) for all retained (l,k), in shell order.
inline std::vector<double> radial_values(const TruncationIndex& t, double r) {
  std::vector<double> out;
  out.reserve(64);
  for (int l = 0; l <= t.l_max(); ++l)
    for (int k = 1; k <= t.K(l); ++k) out.push_back(t.norm(l, k) * sph_j(l, t.root(l, k) * r));
  return out;
}

/// Y_lm(theta, phi) for all l <= l_max, m = -l..l, stored at l*l + l + m.
inline std::vector<cdouble> spherical_harmonics(int l_max, double theta, double phi) {
  std::vector<cdouble> y((l_max + 1) * (l_max + 1));
  const auto col = little_d_column0(l_max, theta);
  for (int m = 0; m <= l_max; ++m) {
    const cdouble e = std::polar(1.0, m * phi);
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    for (int l = m; l <= l_max; ++l) {
      const double a = std::sqrt((2 * l + 1) / (4 * kPi)) * col[m][l - m];
      y[l * l + l + m] = a * e;
      // Y_{l,-m} = (-1)^m conj(Y_{lm})
      if (m > 0) y[l * l + l - m] = sign * a * std::conj(e);
    }
  }
  return y;
}

struct VoxelGeometry {
  std::vector<std::size_t> index;  // flat voxel index inside the ball
  std::vector<long> key;           // radius key per voxel
  std::vector<double> theta, phi;
};

inline VoxelGeometry ball_voxels(int n) {
  VoxelGeometry g;
  Volume probe(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const long key = probe.radius_key(i, j, k);
        const double r = probe.radius_from_key(key);
        if (r > 1.0) continue;
        const double x = probe.coord(i), y = probe.coord(j), z = probe.coord(k);
        g.index.push_back((std::size_t(i) * n + j) * n + k);
        g.key.push_back(key);
        g.theta.push_back(std::acos(std::clamp(z / r, -1.0, 1.0)));
        g.phi.push_back(std::atan2(y, x));
      }
  return g;
}

}  // namespace detail

/// Ball-harmonic coefficients <v, psi_{klm}> by midpoint quadrature over voxels
/// inside the unit ball (voxels outside are ignored, i.e. treated as zero).
inline BallCoefficients forward_transform(const Volume& v,
                                          const std::shared_ptr<const TruncationIndex>& t) {
  if (!t || t->size() == 0) throw EmptyTruncation("empty truncation index");
  const int n = v.n();
  const int lmax = t->l_max();
  const detail::VoxelGeometry geo = detail::ball_voxels(n);
  std::map<long, std::vector<double>> radial;
  for (long key : geo.key)
    if (!radial.count(key)) radial.emplace(key, detail::radial_values(*t, v.radius_from_key(key)));

  const double dv = v.voxel_volume();
  CVecX acc = CVecX::Zero(t->size());
  for (std::size_t p = 0; p < geo.index.size(); ++p) {
    const double val = v[geo.index[p]];
    if (val == 0.0) continue;
    const auto y = detail::spherical_harmonics(lmax, geo.theta[p], geo.phi[p]);
    const std::vector<double>& rad = radial.at(geo.key[p]);
    int shell = 0, off = 0;
    for (int l = 0; l <= lmax; ++l) {
      const cdouble* yl = &y[l * l];
      for (int k = 1; k <= t->K(l); ++k, ++shell) {
        const double w = val * rad[shell] * dv;
        for (int m = 0; m < 2 * l + 1; ++m) acc[off + m] += w * yl[m];
        off += 2 * l + 1;
      }
    }
  }
  return {t, acc};
}

/// Pointwise real part of sum c_{klm} psi_{klm} on voxel centers; zero outside the ball.
inline Volume synthesize(const BallCoefficients& c, int n) {
  const TruncationIndex& t = *c.truncation;
  const int lmax = t.l_max();
  Volume out(n);
  const detail::VoxelGeometry geo = detail::ball_voxels(n);
  std::map<long, std::vector<double>> radial;
  for (std::size_t p = 0; p < geo.index.size(); ++p) {
    const long key = geo.key[p];
    auto it = radial.find(key);
    if (it == radial.end())
      it = radial.emplace(key, detail::radial_values(t, out.radius_from_key(key))).first;
    const auto y = detail::spherical_harmonics(lmax, geo.theta[p], geo.phi[p]);
    double s = 0;
    int shell = 0, off = 0;
    for (int l = 0; l <= lmax; ++l) {
      const cdouble* yl = &y[l * l];
      for (int k = 1; k <= t.K(l); ++k, ++shell) {
        cdouble sum = 0;
        for (int m = 0; m < 2 * l + 1; ++m) sum += c.values[off + m] * std::conj(yl[m]);
        s += it->second[shell] * sum.real();
        off += 2 * l + 1;
      }
    }
    out[geo.index[p]] = s;
  }
  return out;
}

/// Coefficients of g.u, (g.u)(x) = u(g^{-1} x): each shell maps to conj(D^l(g)) times itself.
inline BallCoefficients rotate_coefficients(const BallCoefficients& c, const EulerZYZ& g) {
  const TruncationIndex& t = *c.truncation;
  BallCoefficients out{c.truncation, CVecX(c.values.size())};
  for (int l = 0; l <= t.l_max(); ++l) {
    const CMatX d = wigner_D(l, g).D.conjugate();
    for (int k = 1; k <= t.K(l); ++k) out.shell(l, k) = d * c.shell(l, k);
  }
  return out;
}

}  // namespace matcha
