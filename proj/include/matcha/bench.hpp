#pragma once

// Planted-rotation benchmark: per trial a phantom is rotated by a Haar-random rotation,
// corrupted at each SNR and aligned by every method at every final band.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "matcha/ball_harmonics.hpp"
#include "matcha/correlation.hpp"
#include "matcha/phantom.hpp"
#include "matcha/refine.hpp"

namespace matcha {

enum class PlantMode { Analytic, Trilinear };

struct BenchConfig {
  int trials = 100;
  int n = 32;
  std::vector<double> snr_db = {0.0};  // +inf means noiseless
  std::vector<int> final_bands = {16};
  int L0 = 8;
  int band_step = 4;
  std::vector<int> marching;  // explicit bands below the final one; empty: L0, L0 + step, ...
  std::vector<std::string> methods = {"matcha", "grid"};
  int N_C = 10;
  int K = 2;
  int M_iter = 1;
  double lambda = 0;  // <= 0: smallest budget that retains the largest final band
  std::uint64_t master_seed = 1;
  PlantMode plant = PlantMode::Analytic;
  PhantomOptions phantom;
  bool deterministic = false;  // zero the time column so output is byte-stable

  void validate() const {
    if (trials < 0) throw ConfigError("trials must be >= 0");
    if (n < 16) throw ConfigError("bench volumes need N >= 16");
    if (snr_db.empty()) throw ConfigError("at least one SNR level is required");
    for (double s : snr_db)
      if (std::isnan(s) || s == -std::numeric_limits<double>::infinity()) throw ConfigError("invalid SNR level");
    if (final_bands.empty()) throw ConfigError("at least one final band is required");
    for (int L : final_bands)
      if (L < 1) throw ConfigError("final bands must be >= 1");
    if (L0 < 1 || band_step < 1) throw ConfigError("L0 and band step must be >= 1");
    for (std::size_t i = 0; i < marching.size(); ++i)
      if (marching[i] < 0 || (i && marching[i] <= marching[i - 1]))
        throw ConfigError("marching bands must be non-negative and strictly increasing");
    if (methods.empty()) throw ConfigError("at least one method is required");
    for (const std::string& m : methods)
      if (m != "matcha" && m != "grid") throw ConfigError("unknown method '" + m + "'");
    if (N_C < 1 || K < 1 || M_iter < 1) throw ConfigError("N_C, K and M_iter must be >= 1");
  }

  /// Marching bands below L (L0, L0 + step, ... unless given explicitly), then L.
  Schedule schedule_for(int L) const {
    Schedule s;
    if (marching.empty()) {
      for (int b = L0; b < L; b += band_step) s.bands.push_back(b);
    } else {
      for (int b : marching)
        if (b < L) s.bands.push_back(b);
    }
    s.bands.push_back(L);
    s.N_C = N_C;
    s.K = K;
    s.M_iter = M_iter;
    return s;
  }

  int max_band() const { return *std::max_element(final_bands.begin(), final_bands.end()); }
};

struct BenchRecord {
  std::string method;
  std::uint64_t seed = 0;
  double snr_db = 0;
  int l_max = 0;
  int n_c = 0;
  int k = 0;
  double error_deg = 0;
  double time_s = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 5% above the first zero of j_L, so degree L keeps at least one radial shell.
inline double lambda_for_degree(int L) {
  const auto roots = bessel_roots(L, 1.5 * L + 10);
  return 1.05 * roots[L].front();
}

namespace detail {

inline double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<BenchRecord> bench_trial(const BenchConfig& c, int trial,
                                            const std::shared_ptr<const TruncationIndex>& t) {
  std::vector<BenchRecord> out;
  const std::uint64_t seed = splitmix64(c.master_seed * 1000003ULL + std::uint64_t(trial));
  Rng rng(seed);
  const RotationMatrix g = random_rotation(rng);
  const Phantom p = make_phantom(seed, c.n, c.phantom);
  const Volume clean = c.plant == PlantMode::Analytic ? p.render(c.n, g) : rotate_volume(p.volume, g);
  const BallCoefficients hc = forward_transform(p.volume, t);
  const int Lmax = c.max_band();
  for (std::size_t si = 0; si < c.snr_db.size(); ++si) {
    const Volume f = add_noise(clean, c.snr_db[si], splitmix64(seed ^ (0x5bd1e995ULL * (si + 1))));
    const SigmaBlocks s = compute_sigma(forward_transform(f, t), hc, Lmax);
    for (int L : c.final_bands)
      for (const std::string& m : c.methods) {
        BenchRecord r{m, seed, c.snr_db[si], L, c.N_C, c.K, 0, 0};
        const auto t0 = std::chrono::steady_clock::now();
        EulerZYZ est;
        if (m == "matcha") {
          est = matcha::matcha(s, c.schedule_for(L)).rotation;
        } else {
          est = grid_search(s, L, c.K);
          r.n_c = 1;
        }
        r.time_s = c.deterministic ? 0.0 : elapsed(t0);
        r.error_deg = rad2deg(geodesic_distance(euler_to_matrix(est), g));
        out.push_back(r);
      }
  }
  return out;
}

}  // namespace detail

/// Runs every trial; records are sorted by (method, seed, snr_db, l_max).
inline std::vector<BenchRecord> bench_run(const BenchConfig& c) {
  c.validate();
  std::vector<BenchRecord> all;
  if (c.trials == 0) return all;
  const double lambda = c.lambda > 0 ? c.lambda : lambda_for_degree(c.max_band());
  const auto t = build_truncation(lambda, c.max_band());
  if (t->l_max() < c.max_band())
    throw ConfigError("frequency budget " + std::to_string(lambda) + " does not reach degree " +
                      std::to_string(c.max_band()));
  std::vector<std::vector<BenchRecord>> per(c.trials);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < c.trials; ++i) {
    try {
      per[i] = detail::bench_trial(c, i, t);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  for (auto& v : per) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end(), [](const BenchRecord& a, const BenchRecord& b) {
    return std::tie(a.method, a.seed, a.snr_db, a.l_max) < std::tie(b.method, b.seed, b.snr_db, b.l_max);
  });
  return all;
}

inline std::string format_number(double v, const char* fmt = "%.6f") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline const char* kBenchCsvHeader = "method,seed,snr_db,l_max,n_c,k,error_deg,time_s";

inline std::string to_csv(const std::vector<BenchRecord>& rs) {
  std::string s = std::string(kBenchCsvHeader) + "\n";
  for (const BenchRecord& r : rs)
    s += r.method + "," + std::to_string(r.seed) + "," + format_number(r.snr_db, "%g") + "," + std::to_string(r.l_max) +
         "," + std::to_string(r.n_c) + "," + std::to_string(r.k) + "," + format_number(r.error_deg) + "," +
         format_number(r.time_s) + "\n";
  return s;
}

/// Linear interpolation between order statistics (q in [0, 1]).
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const std::size_t i = std::size_t(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - double(i)) * (v[i + 1] - v[i]);
}

struct BenchCell {
  std::string method;
  double snr_db = 0;
  int l_max = 0;
  int count = 0;
  double p50 = 0, p90 = 0, mean_time = 0;
};

inline std::vector<BenchCell> summarize(const std::vector<BenchRecord>& rs) {
  std::map<std::tuple<std::string, double, int>, std::vector<const BenchRecord*>> cells;
  for (const BenchRecord& r : rs) cells[{r.method, r.snr_db, r.l_max}].push_back(&r);
  std::vector<BenchCell> out;
  for (const auto& [key, v] : cells) {
    BenchCell c{std::get<0>(key), std::get<1>(key), std::get<2>(key), int(v.size())};
    std::vector<double> e;
    for (const BenchRecord* r : v) e.push_back(r->error_deg), c.mean_time += r->time_s;
    c.p50 = percentile(e, 0.5);
    c.p90 = percentile(e, 0.9);
    c.mean_time /= double(v.size());
    out.push_back(c);
  }
  return out;
}

inline nlohmann::json summary_json(const std::vector<BenchRecord>& rs, const BenchConfig& c) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["trials"] = c.trials;
  j["n"] = c.n;
  j["master_seed"] = c.master_seed;
  j["cells"] = nlohmann::json::array();
  for (const BenchCell& cell : summarize(rs))
    j["cells"].push_back({{"method", cell.method},
                          {"snr_db", std::isfinite(cell.snr_db) ? nlohmann::json(cell.snr_db) : nlohmann::json("inf")},
                          {"l_max", cell.l_max},
                          {"count", cell.count},
                          {"p50_deg", cell.p50},
                          {"p90_deg", cell.p90},
                          {"mean_time_s", cell.mean_time}});
  return j;
}

}  // namespace matcha
