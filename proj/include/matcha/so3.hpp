#pragma once

// Rotation algebra in the ZYZ Euler convention g = r_z(alpha) r_y(beta) r_z(gamma).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "matcha/errors.hpp"

namespace matcha {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Rng = std::mt19937_64;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double deg2rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wrap an angle to [0, 2pi).
inline double wrap_two_pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;  // fmod of tiny negatives rounds up to 2pi
  return w;
}

/// ZYZ Euler angles in the canonical chart [0,2pi) x [0,pi] x [0,2pi).
///
/// Construction normalizes: a beta outside [0,pi] is reflected back into the
/// chart (shifting alpha and gamma by pi, which leaves the rotation unchanged),
/// then alpha and gamma are wrapped.
class EulerZYZ {
 public:
  EulerZYZ() = default;
  EulerZYZ(double alpha, double beta, double gamma) {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma))
      throw NumericError("EulerZYZ: non-finite angle");
    double b = std::fmod(beta, kTwoPi);
    if (b < 0.0) b += kTwoPi;
    if (b > kPi) {
      b = kTwoPi - b;
      alpha += kPi;
      gamma += kPi;
    }
    alpha_ = wrap_two_pi(alpha);
    beta_ = std::clamp(b, 0.0, kPi);
    gamma_ = wrap_two_pi(gamma);
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }

  Vec3 as_vector() const { return {alpha_, beta_, gamma_}; }
  static EulerZYZ from_vector(const Vec3& v) { return {v[0], v[1], v[2]}; }

  friend bool operator==(const EulerZYZ&, const EulerZYZ&) = default;

 private:
  double alpha_ = 0.0;
  double beta_ = 0.0;
  double gamma_ = 0.0;
};

inline Mat3 rz(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

inline Mat3 ry(double b) {
  const double c = std::cos(b), s = std::sin(b);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

/// A proper rotation of R^3. Products and inverses of valid rotations are
/// trusted; external matrices go through `checked`.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Mat3::Identity()) {}

  static RotationMatrix checked(const Mat3& m, double tol = 1e-9) {
    if (!m.allFinite()) throw NotARotation("rotation matrix has non-finite entries");
    const double orth = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > tol || std::abs(m.determinant() - 1.0) > tol)
      throw NotARotation("matrix is not orthogonal with determinant 1");
    return RotationMatrix(m);
  }
  static RotationMatrix unchecked(const Mat3& m) { return RotationMatrix(m); }

  const Mat3& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  RotationMatrix inverse() const { return RotationMatrix(m_.transpose()); }
  Vec3 apply(const Vec3& x) const { return m_ * x; }

  friend RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) {
    return RotationMatrix(a.m_ * b.m_);
  }

 private:
  explicit RotationMatrix(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

inline RotationMatrix euler_to_matrix(const EulerZYZ& e) {
  return RotationMatrix::unchecked(rz(e.alpha()) * ry(e.beta()) * rz(e.gamma()));
}

/// Inverse of euler_to_matrix. At beta in {0, pi} the combined in-plane angle is
/// stored in alpha and gamma is set to 0.
inline EulerZYZ matrix_to_euler(const RotationMatrix& rot, double tol = 1e-9) {
  const Mat3 r = RotationMatrix::checked(rot.matrix(), tol).matrix();
  const double sb = std::hypot(r(0, 2), r(1, 2));
  const double beta = std::atan2(sb, r(2, 2));
  constexpr double kGimbal = 1e-12;
  if (sb < kGimbal) {
    if (r(2, 2) > 0.0) return {std::atan2(r(1, 0), r(0, 0)), 0.0, 0.0};
    return {std::atan2(-r(1, 0), -r(0, 0)), kPi, 0.0};
  }
  return {std::atan2(r(1, 2), r(0, 2)), beta, std::atan2(r(2, 1), -r(2, 0))};
}

/// Rotation angle of r1^T r2, in [0, pi].
inline double geodesic_distance(const RotationMatrix& r1, const RotationMatrix& r2) {
  const Mat3 m = r1.matrix().transpose() * r2.matrix();
  const double c = std::clamp((m.trace() - 1.0) * 0.5, -1.0, 1.0);
  // atan2 form of arccos(c); keeps precision for small angles
  const Vec3 v(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double s = std::min(0.5 * v.norm(), 1.0);
  return std::clamp(std::atan2(s, c), 0.0, kPi);
}

inline double geodesic_distance(const EulerZYZ& a, const EulerZYZ& b) {
  return geodesic_distance(euler_to_matrix(a), euler_to_matrix(b));
}

/// Composition a∘b as Euler angles.
inline EulerZYZ compose(const EulerZYZ& a, const EulerZYZ& b) {
  return matrix_to_euler(euler_to_matrix(a) * euler_to_matrix(b));
}

inline EulerZYZ inverse(const EulerZYZ& e) {
  return matrix_to_euler(euler_to_matrix(e).inverse());
}

/// Rotation exp([w]_x) by Rodrigues' formula.
inline RotationMatrix exp_so3(const Vec3& w) {
  const double th = w.norm();
  Mat3 k;
  k << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
  if (th < 1e-12) return RotationMatrix::unchecked(Mat3::Identity() + k);
  const double a = std::sin(th) / th;
  const double b = (1.0 - std::cos(th)) / (th * th);
  return RotationMatrix::unchecked(Mat3::Identity() + a * k + b * k * k);
}

/// Rotation vector w with exp_so3(w) == r, |w| in [0, pi].
inline Vec3 log_so3(const RotationMatrix& r) {
  const Mat3& m = r.matrix();
  const double th = geodesic_distance(RotationMatrix(), r);
  const Vec3 v(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  if (th < 1e-12) return 0.5 * v;
  if (kPi - th > 1e-6) return v * (th / (2.0 * std::sin(th)));
  // near pi: axis from the symmetric part
  const Mat3 b = 0.5 * (m + Mat3::Identity());
  int i = 0;
  b.diagonal().maxCoeff(&i);
  Vec3 axis = b.col(i) / std::sqrt(std::max(b(i, i), 1e-300));
  axis.normalize();
  if (axis.dot(v) < 0.0) axis = -axis;
  return axis * th;
}

/// Haar-uniform rotation from a uniform unit quaternion (Shoemake).
inline RotationMatrix random_rotation(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double x = a * std::sin(kTwoPi * u2), y = a * std::cos(kTwoPi * u2);
  const double z = b * std::sin(kTwoPi * u3), w = b * std::cos(kTwoPi * u3);
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return RotationMatrix::unchecked(m);
}

inline EulerZYZ random_euler(Rng& rng) { return matrix_to_euler(random_rotation(rng)); }

/// Rotation at geodesic distance `angle` from `center` along a uniformly random axis.
inline RotationMatrix perturb_rotation(const RotationMatrix& center, double angle, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  axis.normalize();
  return center * exp_so3(axis * angle);
}

}  // namespace matcha
