#pragma once

// Shared constructions for tests: landscapes with known peaks and planted-rotation pairs.

#include <utility>
#include <vector>

#include "matcha/ball_harmonics.hpp"
#include "matcha/correlation.hpp"
#include "matcha/phantom.hpp"

namespace fixture {

using namespace matcha;

/// A_l = w_l sum_p c_p conj(D^l(g_p)), so C(g) = sum_l w_l sum_p c_p chi_l(g_p^{-1} g),
/// chi_l(theta) = sin((l+1/2) theta) / sin(theta/2), maximal at g = g_p.
inline SigmaBlocks character_sigma(const std::vector<std::pair<EulerZYZ, double>>& peaks,
                                   const std::vector<double>& w) {
  const int L = int(w.size()) - 1;
  std::vector<CMatX> b(L + 1);
  for (int l = 0; l <= L; ++l) {
    b[l] = CMatX::Zero(2 * l + 1, 2 * l + 1);
    for (const auto& [g, c] : peaks) b[l] += w[l] * c * wigner_D(l, g).D.conjugate();
  }
  return make_sigma(std::move(b), "characters");
}

/// Fejer-like weights (L+1-l) that keep side lobes low.
inline std::vector<double> fejer(int L) {
  std::vector<double> w(L + 1);
  for (int l = 0; l <= L; ++l) w[l] = L + 1 - l;
  return w;
}

inline PhantomOptions smooth_phantom() {
  PhantomOptions o;
  o.min_width = 0.12;
  o.max_width = 0.2;
  return o;
}

struct PlantedPair {
  BallCoefficients f, h;  // f is h rendered at the planted rotation
  EulerZYZ truth;
};

/// h = phantom, f = phantom rendered analytically at g*, both transformed.
inline PlantedPair planted_pair(const Phantom& p, int n, const std::shared_ptr<const TruncationIndex>& t,
                                const EulerZYZ& g) {
  PlantedPair r{forward_transform(p.render(n, euler_to_matrix(g)), t), forward_transform(p.volume, t), g};
  return r;
}

/// Same, but f obtained by steering the coefficients of h (exact optimum at g*).
inline PlantedPair steered_pair(const Phantom& p, const std::shared_ptr<const TruncationIndex>& t,
                                const EulerZYZ& g) {
  BallCoefficients h = forward_transform(p.volume, t);
  BallCoefficients f = rotate_coefficients(h, g);
  return {f, h, g};
}

/// Rotation away from the Euler-chart poles.
inline EulerZYZ interior_rotation(Rng& rng, double margin = 0.3) {
  for (;;) {
    const EulerZYZ e = random_euler(rng);
    if (e.beta() > margin && e.beta() < kPi - margin) return e;
  }
}

}  // namespace fixture
