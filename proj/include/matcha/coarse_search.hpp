#pragma once

// Exhaustive evaluation of C_L0 on an equiangular SO(3) grid and candidate extraction.
//
// Nodes: alpha_a = 2 pi a / n_alpha, gamma_c = 2 pi c / n_alpha, beta_j = (j + 1/2) pi / n_beta,
// n_alpha = 2K(L0+1), n_beta = K(L0+1). Each beta slice is one 2D DFT over (m, m').

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "matcha/correlation.hpp"
#include "matcha/fft.hpp"

namespace matcha {

struct So3Grid {
  int L0 = 0;
  int K = 1;
  int n_alpha = 0;  // also n_gamma
  int n_beta = 0;
  std::vector<double> values;  // index (j * n_alpha + a) * n_alpha + c

  double alpha(int a) const { return kTwoPi * a / n_alpha; }
  double gamma(int c) const { return kTwoPi * c / n_alpha; }
  double beta(int j) const { return (j + 0.5) * kPi / n_beta; }
  double spacing() const { return kTwoPi / n_alpha; }
  long index(int j, int a, int c) const { return (long(j) * n_alpha + a) * n_alpha + c; }
  double at(int j, int a, int c) const { return values[index(j, a, c)]; }
  EulerZYZ node(int j, int a, int c) const { return {alpha(a), beta(j), gamma(c)}; }
  EulerZYZ node(long idx) const {
    const int c = int(idx % n_alpha), a = int((idx / n_alpha) % n_alpha), j = int(idx / (long(n_alpha) * n_alpha));
    return node(j, a, c);
  }
  long size() const { return long(values.size()); }
};

struct Candidate {
  EulerZYZ rotation;
  double score = 0;
  long grid_index = -1;  // -1 once refined away from a node, or when not from a grid
  bool refined = false;
  std::vector<std::pair<int, double>> history;  // (band, score)
  int band = 0;  // band at which `score` was last evaluated

  std::string origin() const { return refined ? "refined" : "grid:" + std::to_string(grid_index); }
};

inline So3Grid grid_eval(const SigmaBlocks& s, int L0, int K) {
  detail::check_cutoff(s, L0);
  if (K < 1) throw ConfigError("oversampling factor K must be >= 1");
  if (K * (L0 + 1) < 4) throw ConfigError("grid too coarse: K*(L0+1) must be >= 4");
  So3Grid g;
  g.L0 = L0;
  g.K = K;
  g.n_beta = K * (L0 + 1);
  g.n_alpha = 2 * g.n_beta;
  const int n = g.n_alpha;
  g.values.assign(std::size_t(g.n_beta) * n * n, 0.0);
  const FftPlan plan({n, n}, FFTW_FORWARD);

#pragma omp parallel
  {
    FftBuffer buf(std::size_t(n) * n);
#pragma omp for schedule(dynamic)
    for (int j = 0; j < g.n_beta; ++j) {
      const auto d = little_d_all(L0, g.beta(j));
      buf.zero();
      for (int l = 0; l <= L0; ++l)
        for (int a = 0; a < 2 * l + 1; ++a) {
          const int m = a - l, row = (m + n) % n;
          for (int b = 0; b < 2 * l + 1; ++b) {
            const int mp = b - l, col = (mp + n) % n;
            buf[std::size_t(row) * n + col] += s.blocks[l](a, b) * d[l].d(a, b);
          }
        }
      plan.execute(buf);
      double* out = &g.values[std::size_t(j) * n * n];
      for (std::size_t i = 0; i < std::size_t(n) * n; ++i) out[i] = buf[i].real();
    }
  }
  return g;
}

/// Default merge radius: twice the alpha spacing.
inline double default_merge_radius(const So3Grid& g) { return 2.0 * g.spacing(); }

namespace detail {
// p outranks q: higher value, ties to the lexicographically smaller index
inline bool outranks(const So3Grid& g, long p, long q) {
  const double vp = g.values[p], vq = g.values[q];
  return vp > vq || (vp == vq && p < q);
}
}  // namespace detail

/// Strict local maxima (26-neighborhood, alpha/gamma periodic, beta clamped), merged
/// greedily within merge_radius in score order, at most N_C returned.
inline std::vector<Candidate> find_local_maxima(const So3Grid& g, int N_C, double merge_radius = -1) {
  if (N_C < 1) throw ConfigError("N_C must be >= 1");
  if (merge_radius < 0) merge_radius = default_merge_radius(g);
  const int n = g.n_alpha;
  std::vector<long> peaks;
  for (int j = 0; j < g.n_beta; ++j)
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) {
        const long p = g.index(j, a, c);
        bool is_max = true;
        for (int dj = -1; dj <= 1 && is_max; ++dj) {
          const int jj = j + dj;
          if (jj < 0 || jj >= g.n_beta) continue;
          for (int da = -1; da <= 1 && is_max; ++da)
            for (int dc = -1; dc <= 1; ++dc) {
              if (!dj && !da && !dc) continue;
              const long q = g.index(jj, (a + da + n) % n, (c + dc + n) % n);
              if (!detail::outranks(g, p, q)) {
                is_max = false;
                break;
              }
            }
        }
        if (is_max) peaks.push_back(p);
      }
  std::sort(peaks.begin(), peaks.end(), [&](long p, long q) { return detail::outranks(g, p, q); });

  std::vector<Candidate> out;
  for (long p : peaks) {
    const EulerZYZ e = g.node(p);
    bool dup = false;
    for (const Candidate& c : out)
      if (geodesic_distance(c.rotation, e) <= merge_radius) {
        dup = true;
        break;
      }
    if (dup) continue;
    Candidate c;
    c.rotation = e;
    c.score = g.values[p];
    c.grid_index = p;
    c.band = g.L0;
    c.history.push_back({g.L0, c.score});
    out.push_back(std::move(c));
    if (int(out.size()) == N_C) break;
  }
  return out;
}

/// Index of the global grid maximum (ties to the smallest index).
inline long grid_argmax(const So3Grid& g) {
  long best = 0;
  for (long i = 1; i < g.size(); ++i)
    if (detail::outranks(g, i, best)) best = i;
  return best;
}

}  // namespace matcha
