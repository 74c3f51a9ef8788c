#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "matcha/wigner.hpp"
#include "oracles.hpp"

using namespace matcha;

namespace {

EulerZYZ random_interior(Rng& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  return {kTwoPi * u(rng), 0.05 + (kPi - 0.1) * u(rng), kTwoPi * u(rng)};
}

double rel_err(const CMatX& a, const CMatX& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-3);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// spin-l J_y in the |l m> basis, m ascending
CMatX spin_jy(int l) {
  const int n = 2 * l + 1;
  CMatX jp = CMatX::Zero(n, n);
  for (int m = -l; m < l; ++m) jp(m + 1 + l, m + l) = std::sqrt(double(l - m) * (l + m + 1));
  const CMatX jm = jp.adjoint();
  return (jp - jm) / cdouble(0, 2);
}

CMatX shifted(int l, const EulerZYZ& e, int which, double h) {
  Vec3 v = e.as_vector();
  v[which] += h;
  return wigner_D(l, EulerZYZ(v[0], v[1], v[2])).D;
}

}  // namespace

TEST(LittleD, DegreeZeroAndOne) {
  for (double b : {0.0, 0.4, 2.0, kPi}) {
    EXPECT_EQ(little_d(0, b).d(0, 0), 1.0);
    const LittleDBlock d1 = little_d(1, b);
    EXPECT_NEAR(d1(0, 0), std::cos(b), 1e-12);
    EXPECT_NEAR(d1(1, 0), -std::sin(b) / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(d1(1, 1), (1 + std::cos(b)) / 2, 1e-12);
    EXPECT_NEAR(d1(-1, 1), (1 - std::cos(b)) / 2, 1e-12);
  }
}

TEST(LittleD, MatchesMatrixExponential) {
  for (int l : {1, 2, 5, 9}) {
    for (double b : {0.3, 1.7, 2.9}) {
      const CMatX ref = (cdouble(0, -b) * spin_jy(l)).exp();
      const LittleDBlock d = little_d(l, b);
      ASSERT_LT((ref - d.d.cast<cdouble>()).cwiseAbs().maxCoeff(), 1e-12) << l << " " << b;
    }
  }
}

TEST(LittleD, MatchesExtendedPrecisionSum) {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0, kPi);
  for (int trial = 0; trial < 4; ++trial) {
    const double b = u(rng);
    const LittleDBlock d = little_d(32, b);
    double err = 0;
    for (int m = -32; m <= 32; ++m)
      for (int mp = -32; mp <= 32; ++mp)
        err = std::max(err, std::abs(d(m, mp) - oracle::wigner_d_sum(32, m, mp, b)));
    EXPECT_LT(err, 1e-9) << "beta " << b;
  }
}

TEST(LittleD, ExactAtPoles) {
  const LittleDBlock z = little_d(7, 0.0);
  EXPECT_EQ(z.d, MatX::Identity(15, 15));
  const LittleDBlock p = little_d(7, kPi);
  for (int m = -7; m <= 7; ++m)
    for (int mp = -7; mp <= 7; ++mp) {
      const double expect = (mp == -m) ? ((7 + m) % 2 == 0 ? 1.0 : -1.0) : 0.0;
      ASSERT_EQ(p(m, mp), expect);
      ASSERT_NEAR(little_d(7, kPi - 1e-9)(m, mp), expect, 1e-7);
    }
}

TEST(LittleD, OrthogonalAndSymmetric) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0, kPi);
  for (int trial = 0; trial < 10; ++trial) {
    const double b = u(rng);
    const auto all = little_d_all(64, b);
    for (const auto& blk : all) {
      const int n = 2 * blk.degree + 1;
      ASSERT_LT((blk.d * blk.d.transpose() - MatX::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
      for (int m = -blk.degree; m <= blk.degree; ++m)
        for (int mp = -blk.degree; mp <= blk.degree; ++mp)
          ASSERT_NEAR(blk(m, mp), ((m - mp) % 2 == 0 ? 1 : -1) * blk(mp, m), 1e-10);
    }
  }
}

TEST(LittleD, DegreeCap) {
  EXPECT_NO_THROW(little_d(128, 1.0));
  EXPECT_THROW(little_d(kMaxDegree + 1, 1.0), DegreeTooLarge);
}

TEST(LittleD, ColumnZeroMatchesBlocks) {
  const auto col = little_d_column0(20, 1.234);
  const auto all = little_d_all(20, 1.234);
  for (int m = 0; m <= 20; ++m)
    for (int l = m; l <= 20; ++l) ASSERT_NEAR(col[m][l - m], all[l](m, 0), 1e-14);
}

TEST(WignerD, IdentityAndPhases) {
  for (int l = 0; l <= 10; ++l) {
    const int n = 2 * l + 1;
    EXPECT_LT((wigner_D(l, {}).D - CMatX::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-15);
  }
  const double a = 0.81;
  const WignerDBlock d = wigner_D(1, {a, 0, 0});
  EXPECT_LT(std::abs(d(-1, -1) - std::polar(1.0, a)), 1e-15);
  EXPECT_LT(std::abs(d(0, 0) - 1.0), 1e-15);
  EXPECT_LT(std::abs(d(1, 1) - std::polar(1.0, -a)), 1e-15);
  EXPECT_EQ(std::abs(d(1, 0)), 0.0);
}

TEST(WignerD, UnitaryToDegree64) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const EulerZYZ e = random_euler(rng);
    const int l = trial < 10 ? 64 : int(trial % 65);
    const CMatX d = wigner_D(l, e).D;
    ASSERT_LT((d * d.adjoint() - CMatX::Identity(2 * l + 1, 2 * l + 1)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(WignerD, RepresentationProperty) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const EulerZYZ g1 = random_euler(rng), g2 = random_euler(rng);
    const EulerZYZ g12 = compose(g1, g2);
    for (int l = 0; l <= 16; ++l) {
      const CMatX lhs = wigner_D(l, g12).D;
      const CMatX rhs = wigner_D(l, g1).D * wigner_D(l, g2).D;
      ASSERT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(WignerD, HaarOrthogonalityConstant) {
  Rng rng(8);
  const int n = 40000, lmax = 3;
  std::vector<CMatX> acc;
  // accumulate E[D^l_{mm'} conj(D^l'_{nn'})] for l = l' only, plus one cross-degree entry
  for (int l = 0; l <= lmax; ++l) acc.push_back(CMatX::Zero((2 * l + 1) * (2 * l + 1), (2 * l + 1) * (2 * l + 1)));
  cdouble cross = 0;
  for (int i = 0; i < n; ++i) {
    const EulerZYZ g = random_euler(rng);
    std::vector<CMatX> ds;
    for (int l = 0; l <= lmax; ++l) ds.push_back(wigner_D(l, g).D);
    for (int l = 0; l <= lmax; ++l) {
      const Eigen::Map<const CVecX> v(ds[l].data(), ds[l].size());
      acc[l] += v * v.adjoint();
    }
    cross += ds[2](1, 3) * std::conj(ds[3](2, 4));
  }
  for (int l = 0; l <= lmax; ++l) {
    const int s = (2 * l + 1) * (2 * l + 1);
    const CMatX expect = CMatX::Identity(s, s) / double(2 * l + 1);
    EXPECT_LT((acc[l] / double(n) - expect).cwiseAbs().maxCoeff(), 0.02) << "degree " << l;
  }
  EXPECT_LT(std::abs(cross / double(n)), 0.02);
}

TEST(DWignerD, AlphaGammaExact) {
  Rng rng(10);
  const EulerZYZ e = random_euler(rng);
  const WignerDBlock d = wigner_D(1, e);
  const WignerDGradient g = d_wigner_D(1, e);
  for (int m = -1; m <= 1; ++m)
    for (int mp = -1; mp <= 1; ++mp) {
      EXPECT_EQ(g.alpha(m, mp), cdouble(0, -m) * d(m, mp));
      EXPECT_EQ(g.gamma(m, mp), cdouble(0, -mp) * d(m, mp));
    }
  EXPECT_NEAR(d_wigner_D(1, {0, kPi / 2, 0}).beta(0, 0).real(), -1.0, 1e-12);
}

TEST(DWignerD, FiniteDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int l = 1 + trial % 16;
    const EulerZYZ e = random_interior(rng);
    const WignerDGradient g = d_wigner_D(l, e);
    const double h = 1e-5;
    const WignerDBlock* blocks[3] = {&g.alpha, &g.beta, &g.gamma};
    for (int k = 0; k < 3; ++k) {
      const CMatX fd = (shifted(l, e, k, h) - shifted(l, e, k, -h)) / (2 * h);
      ASSERT_LT(rel_err(blocks[k]->D, fd), 1e-6) << "l=" << l << " axis " << k;
    }
  }
}

TEST(D2WignerD, FiniteDifferences) {
  Rng rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const int l = 1 + trial % 16;
    const EulerZYZ e = random_interior(rng);
    const WignerDHessian H = d2_wigner_D(l, e);
    const double h = 1e-4;
    const CMatX d0 = wigner_D(l, e).D;
    const int pairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
    const WignerDBlock* blocks[6] = {&H.aa, &H.bb, &H.gg, &H.ab, &H.ag, &H.bg};
    for (int k = 0; k < 6; ++k) {
      const int i = pairs[k][0], j = pairs[k][1];
      CMatX fd;
      if (i == j) {
        fd = (shifted(l, e, i, h) - 2.0 * d0 + shifted(l, e, i, -h)) / (h * h);
      } else {
        auto at = [&](double si, double sj) {
          Vec3 v = e.as_vector();
          v[i] += si;
          v[j] += sj;
          return wigner_D(l, EulerZYZ(v[0], v[1], v[2])).D;
        };
        fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
      }
      ASSERT_LT(rel_err(blocks[k]->D, fd), 1e-4) << "l=" << l << " pair " << k;
    }
    const WignerDBlock d = wigner_D(l, e);
    for (int m = -l; m <= l; ++m)
      for (int mp = -l; mp <= l; ++mp)
        ASSERT_LE(std::abs(H.ag(m, mp) - cdouble(0, -m) * (d(m, mp) * cdouble(0, -mp))),
                  1e-15 * std::abs(H.ag(m, mp)));
  }
  const WignerDHessian z = d2_wigner_D(0, {0.3, 1.0, 2.0});
  for (const WignerDBlock* b : {&z.aa, &z.bb, &z.gg, &z.ab, &z.ag, &z.bg}) EXPECT_EQ(std::abs(b->D(0, 0)), 0.0);
}

TEST(LieGenerators, MatchBodyFrameDerivative) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int l = 1 + trial % 8;
    const EulerZYZ e = random_euler(rng);
    const RotationMatrix g = euler_to_matrix(e);
    const CMatX d = wigner_D(l, e).D;
    for (int axis = 0; axis < 3; ++axis) {
      const double h = 1e-5;
      Vec3 w = Vec3::Zero();
      w[axis] = h;
      const CMatX plus = wigner_D(l, matrix_to_euler(g * exp_so3(w))).D;
      const CMatX minus = wigner_D(l, matrix_to_euler(g * exp_so3(-w))).D;
      const CMatX fd = (plus - minus) / (2 * h);
      ASSERT_LT(rel_err(d * lie_generator(l, axis), fd), 1e-6) << "axis " << axis;
    }
  }
}
