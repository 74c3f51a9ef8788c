#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "matcha/so3.hpp"
#include "oracles.hpp"

using namespace matcha;

namespace {

double max_abs(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(EulerZYZ, NormalizesIntoChart) {
  EulerZYZ e(-0.5, 0.3, 7.0);
  EXPECT_NEAR(e.alpha(), kTwoPi - 0.5, 1e-15);
  EXPECT_NEAR(e.gamma(), 7.0 - kTwoPi, 1e-15);
  EulerZYZ r(0.2, -0.4, 0.1);
  EXPECT_GE(r.beta(), 0.0);
  EXPECT_LT(max_abs(euler_to_matrix(r).matrix(), rz(0.2) * ry(-0.4) * rz(0.1)), 1e-14);
  EXPECT_THROW(EulerZYZ(std::nan(""), 0, 0), NumericError);
}

TEST(EulerToMatrix, TrivialCases) {
  EXPECT_LT(max_abs(euler_to_matrix({0, 0, 0}).matrix(), Mat3::Identity()), 1e-15);
  Mat3 expect;
  expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT(max_abs(euler_to_matrix({kPi / 2, 0, 0}).matrix(), expect), 1e-15);
}

TEST(EulerToMatrix, MatchesQuaternionComposition) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    EulerZYZ e(kTwoPi * u(rng), kPi * u(rng), kTwoPi * u(rng));
    const Mat3 q = oracle::quat_to_matrix(oracle::quat_zyz(e.alpha(), e.beta(), e.gamma()));
    const Mat3 r = euler_to_matrix(e).matrix();
    ASSERT_LT(max_abs(q, r), 1e-12);
    ASSERT_LT(max_abs(r.transpose() * r, Mat3::Identity()), 1e-12);
    ASSERT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(MatrixToEuler, RoundTripAndGimbal) {
  const EulerZYZ id = matrix_to_euler(RotationMatrix());
  EXPECT_EQ(id.alpha(), 0.0);
  EXPECT_EQ(id.beta(), 0.0);
  EXPECT_EQ(id.gamma(), 0.0);

  const EulerZYZ e = matrix_to_euler(euler_to_matrix({1.1, 2.0, 0.3}));
  EXPECT_NEAR(e.alpha(), 1.1, 1e-9);
  EXPECT_NEAR(e.beta(), 2.0, 1e-9);
  EXPECT_NEAR(e.gamma(), 0.3, 1e-9);

  const EulerZYZ g = matrix_to_euler(RotationMatrix::checked(rz(0.7)));
  EXPECT_NEAR(g.alpha(), 0.7, 1e-12);
  EXPECT_EQ(g.beta(), 0.0);
  EXPECT_EQ(g.gamma(), 0.0);

  const RotationMatrix flip = RotationMatrix::checked(rz(0.4) * ry(kPi) * rz(0.9));
  const EulerZYZ f = matrix_to_euler(flip);
  EXPECT_NEAR(f.beta(), kPi, 1e-12);
  EXPECT_EQ(f.gamma(), 0.0);
  EXPECT_LT(max_abs(euler_to_matrix(f).matrix(), flip.matrix()), 1e-12);

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const RotationMatrix r = random_rotation(rng);
    ASSERT_LT(max_abs(euler_to_matrix(matrix_to_euler(r)).matrix(), r.matrix()), 1e-9);
  }
}

TEST(MatrixToEuler, RejectsNonRotations) {
  Mat3 m = Mat3::Identity();
  m(0, 0) = -1;
  EXPECT_THROW(matrix_to_euler(RotationMatrix::unchecked(m)), NotARotation);
  EXPECT_THROW(RotationMatrix::checked(2.0 * Mat3::Identity()), NotARotation);
}

TEST(GeodesicDistance, AxisAngleAndQuaternionOracle) {
  EXPECT_EQ(geodesic_distance(RotationMatrix(), RotationMatrix()), 0.0);
  for (double th : {0.0, 1e-7, 0.3, 1.5, 3.0, kPi})
    EXPECT_NEAR(geodesic_distance(RotationMatrix(), RotationMatrix::checked(rz(th))), th, 1e-12);

  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const RotationMatrix a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    const double d = geodesic_distance(a, b);
    const double q = oracle::quat_angle(oracle::matrix_to_quat(a.matrix()), oracle::matrix_to_quat(b.matrix()));
    ASSERT_NEAR(d, q, 1e-10);
    ASSERT_NEAR(d, geodesic_distance(b, a), 1e-14);
    ASSERT_LE(geodesic_distance(a, c), d + geodesic_distance(b, c) + 1e-9);
    ASSERT_NEAR(geodesic_distance(c * a, c * b), d, 1e-9);
    ASSERT_NEAR(geodesic_distance(a * c, b * c), d, 1e-9);
  }
}

TEST(RandomRotation, DeterministicGivenSeed) {
  Rng a(42), b(42);
  EXPECT_EQ(random_rotation(a).matrix(), random_rotation(b).matrix());
}

TEST(RandomRotation, HaarAngleDistribution) {
  Rng rng(2024);
  const int n = 100000;
  std::vector<double> th(n);
  double trace_sum = 0;
  for (int i = 0; i < n; ++i) {
    const RotationMatrix r = random_rotation(rng);
    th[i] = geodesic_distance(RotationMatrix(), r);
    trace_sum += r.matrix().trace();
  }
  std::sort(th.begin(), th.end());
  // Haar angle CDF: (theta - sin theta) / pi
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    const double cdf = (th[i] - std::sin(th[i])) / kPi;
    ks = std::max({ks, std::abs(cdf - double(i) / n), std::abs(cdf - double(i + 1) / n)});
  }
  EXPECT_LT(ks, 0.01);
  EXPECT_LT(std::abs(trace_sum / n), 0.02);
}

TEST(ExpLog, InverseAndPerturb) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const RotationMatrix r = random_rotation(rng);
    const RotationMatrix back = exp_so3(log_so3(r));
    ASSERT_LT(max_abs(back.matrix(), r.matrix()), 1e-9);
    const RotationMatrix p = perturb_rotation(r, 0.05, rng);
    ASSERT_NEAR(geodesic_distance(r, p), 0.05, 1e-12);
  }
  const Vec3 w(0, 0, kPi);
  EXPECT_NEAR(log_so3(exp_so3(w)).norm(), kPi, 1e-9);
}

TEST(Compose, MatchesMatrixProduct) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const EulerZYZ a = random_euler(rng), b = random_euler(rng);
    const Mat3 p = euler_to_matrix(a).matrix() * euler_to_matrix(b).matrix();
    ASSERT_LT(max_abs(euler_to_matrix(compose(a, b)).matrix(), p), 1e-9);
    ASSERT_LT(geodesic_distance(compose(a, inverse(a)), EulerZYZ()), 1e-7);
  }
}
