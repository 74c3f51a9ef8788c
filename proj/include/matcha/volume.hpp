#pragma once

// Cubic voxel volumes on [-1,1]^3 with the unit ball inscribed.
//
// Voxel (i,j,k) sits at x = (i + 1/2 - N/2) * 2/N (likewise y from j, z from k)
// and is stored at data[(i*N + j)*N + k], i.e. z varies fastest.

#include <cmath>
#include <string>
#include <vector>

#include "matcha/errors.hpp"
#include "matcha/so3.hpp"

namespace matcha {

class Volume {
 public:
  Volume() = default;
  explicit Volume(int n) : n_(n), data_(std::size_t(n) * n * n, 0.0) {
    if (n < 8) throw ConfigError("volume side length must be >= 8, got " + std::to_string(n));
  }
  Volume(int n, std::vector<double> data) : Volume(n) {
    if (data.size() != data_.size()) throw ConfigError("volume data size does not match N^3");
    data_ = std::move(data);
  }

  int n() const { return n_; }
  std::size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator()(int i, int j, int k) { return data_[(std::size_t(i) * n_ + j) * n_ + k]; }
  double operator()(int i, int j, int k) const { return data_[(std::size_t(i) * n_ + j) * n_ + k]; }
  double& operator[](std::size_t idx) { return data_[idx]; }
  double operator[](std::size_t idx) const { return data_[idx]; }

  /// Physical coordinate of voxel index i along any axis.
  double coord(int i) const { return (i + 0.5 - 0.5 * n_) * (2.0 / n_); }
  Vec3 position(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
  double voxel_volume() const { return std::pow(2.0 / n_, 3); }

  /// Twice the scaled squared radius as an integer: (2i+1-N)^2 + ... ; exact cache key.
  long radius_key(int i, int j, int k) const {
    const long a = 2 * i + 1 - n_, b = 2 * j + 1 - n_, c = 2 * k + 1 - n_;
    return a * a + b * b + c * c;
  }
  double radius_from_key(long key) const { return std::sqrt(double(key)) / n_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  int n_ = 0;
  std::vector<double> data_;
};

inline double dot(const Volume& a, const Volume& b) {
  if (a.n() != b.n()) throw ConfigError("volume sizes differ");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const Volume& v) { return dot(v, v); }

/// Relative L2 difference ||a - b|| / ||b||.
inline double relative_l2(const Volume& a, const Volume& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Zero every voxel whose center lies outside the sphere of the given radius.
inline Volume mask_ball(Volume v, double radius = 1.0) {
  const int n = v.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (v.radius_from_key(v.radius_key(i, j, k)) > radius) v(i, j, k) = 0.0;
  return v;
}

/// Sample a function of position on the voxel centers.
template <typename F>
Volume sample(int n, F&& f) {
  Volume v(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) v(i, j, k) = f(v.position(i, j, k));
  return v;
}

}  // namespace matcha
