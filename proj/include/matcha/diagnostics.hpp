#pragma once

// Numeric checks of the convergence theory for frequency marching: set gaps, per-step
// perturbation norms, Bernstein ratios, effective bandwidth and a checker for the
// assumptions of the selection guarantee.
//
// Sup-norms are estimated by sampling (global Euler grids via the FFT grid evaluator,
// tangent-space grids inside balls) plus an optional Newton polish of the best sample.
// They are estimates at the stated density, never certified bounds.

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "matcha/coarse_search.hpp"
#include "matcha/correlation.hpp"
#include "matcha/refine.hpp"

namespace matcha {

/// Relative margin inside which an inequality between sampled estimates is inconclusive.
inline constexpr double kSamplingSlack = 0.05;

enum class Flag { Holds, Fails, Inconclusive };

inline const char* to_string(Flag f) {
  switch (f) {
    case Flag::Holds: return "holds";
    case Flag::Fails: return "fails";
    default: return "inconclusive";
  }
}

/// lhs <= rhs (strict: lhs < rhs), judged with a relative slack.
inline Flag compare_le(double lhs, double rhs, double slack = kSamplingSlack) {
  if (!std::isfinite(lhs) || !std::isfinite(rhs)) {
    if (lhs == -std::numeric_limits<double>::infinity() || rhs == std::numeric_limits<double>::infinity())
      return Flag::Holds;
    return Flag::Inconclusive;
  }
  const double m = slack * std::max(std::abs(lhs), std::abs(rhs));
  if (lhs <= rhs - m) return Flag::Holds;
  if (lhs > rhs + m) return Flag::Fails;
  return Flag::Inconclusive;
}

inline Flag all_of(std::initializer_list<Flag> fs) {
  bool inconclusive = false;
  for (Flag f : fs) {
    if (f == Flag::Fails) return Flag::Fails;
    if (f == Flag::Inconclusive) inconclusive = true;
  }
  return inconclusive ? Flag::Inconclusive : Flag::Holds;
}

/// Closed geodesic balls of a common radius around the tracked candidates.
struct BallSet {
  std::vector<EulerZYZ> centers;
  double radius = 0;

  void validate() const {
    if (centers.empty()) throw ConfigError("ball set is empty");
    if (!(radius > 0)) throw ConfigError("ball radius must be positive");
    for (std::size_t i = 0; i < centers.size(); ++i)
      for (std::size_t j = i + 1; j < centers.size(); ++j)
        if (geodesic_distance(centers[i], centers[j]) <= 2 * radius)
          throw ConfigError("balls " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
  }

  /// Index of the ball containing g, or -1.
  int locate(const RotationMatrix& g) const {
    for (std::size_t p = 0; p < centers.size(); ++p)
      if (geodesic_distance(euler_to_matrix(centers[p]), g) <= radius) return int(p);
    return -1;
  }
  int locate(const EulerZYZ& g) const { return locate(euler_to_matrix(g)); }
};

namespace detail {

/// Blocks of degree lo < l <= hi, zero elsewhere, stored up to l_max.
inline SigmaBlocks band_slice(const SigmaBlocks& s, int lo, int hi, int l_max) {
  std::vector<CMatX> b(l_max + 1);
  for (int l = 0; l <= l_max; ++l)
    b[l] = (l > lo && l <= hi) ? s.blocks[l] : CMatX::Zero(2 * l + 1, 2 * l + 1);
  SigmaBlocks r = make_sigma(std::move(b), s.provenance + "|slice");
  r.real_valued = s.real_valued;
  return r;
}

inline SigmaBlocks scaled(const SigmaBlocks& s, double c) {
  std::vector<CMatX> b(s.blocks.size());
  for (std::size_t l = 0; l < b.size(); ++l) b[l] = c * s.blocks[l];
  SigmaBlocks r = make_sigma(std::move(b), s.provenance);
  r.real_valued = s.real_valued;
  return r;
}

/// Blocks of X_i F and of the symmetrised X_i X_j F (body-frame fields), up to L.
inline std::vector<SigmaBlocks> derivative_blocks(const SigmaBlocks& s, int L) {
  std::vector<std::vector<CMatX>> b(9, std::vector<CMatX>(L + 1));
  const int pairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
  for (int l = 0; l <= L; ++l) {
    CMatX t[3];
    for (int i = 0; i < 3; ++i) t[i] = lie_generator(l, i);
    for (int i = 0; i < 3; ++i) b[i][l] = s.blocks[l] * t[i].transpose();
    for (int k = 0; k < 6; ++k) {
      const auto [i, j] = pairs[k];
      b[3 + k][l] = s.blocks[l] * (0.5 * (t[i] * t[j] + t[j] * t[i])).transpose();
    }
  }
  std::vector<SigmaBlocks> out;
  for (auto& v : b) {
    SigmaBlocks r = make_sigma(std::move(v), "derivative");
    r.real_valued = s.real_valued;
    out.push_back(std::move(r));
  }
  return out;
}

/// Oversampling factor whose Euler-grid step 2 pi / n_alpha is at most 1 / density.
inline int grid_factor(int L, double density) {
  int K = std::max(1, int(std::ceil(kPi * density / (L + 1) - 1e-12)));
  while (K * (L + 1) < 4) ++K;
  return K;
}

/// Tangent-space grid of step 1/density inside each ball: c exp([w]x), |w| <= r.
inline std::vector<EulerZYZ> ball_samples(const BallSet& balls, double density, std::vector<int>* owner = nullptr) {
  const double h = 1.0 / density;
  const int n = int(std::floor(balls.radius / h));
  std::vector<EulerZYZ> out;
  for (std::size_t p = 0; p < balls.centers.size(); ++p) {
    const RotationMatrix c = euler_to_matrix(balls.centers[p]);
    for (int i = -n; i <= n; ++i)
      for (int j = -n; j <= n; ++j)
        for (int k = -n; k <= n; ++k) {
          const Vec3 w = h * Vec3(i, j, k);
          if (w.norm() > balls.radius) continue;
          out.push_back(matrix_to_euler(c * exp_so3(w)));
          if (owner) owner->push_back(int(p));
        }
  }
  return out;
}

inline double hessian_op_norm(const Mat3& h) {
  return Eigen::SelfAdjointEigenSolver<Mat3>().computeDirect(h, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
}

/// Newton polish of a local maximum of C_L from `start`.
inline Candidate polish_max(const SigmaBlocks& s, int L, const EulerZYZ& start) {
  return refine_candidate(s, L, start, 25);
}

inline void require_density(const BallSet& balls, double density) {
  if (!(density > 0) || 1.0 / density >= balls.radius / 4)
    throw ConfigError("sampling density too low: need a step below r/4");
}

}  // namespace detail

struct SetGapEstimate {
  double gamma = 0;
  double inside = 0;   // max of F over samples in S (polished)
  double outside = 0;  // max of F over samples outside S (polished)
  EulerZYZ arg_inside, arg_outside;
  double density = 0;  // samples per radian actually used on the global grid
};

/// Gamma_F(S) = max_S F - sup_{not S} F, estimated on the global Euler grid at band L plus
/// tangent grids in the balls.
inline SetGapEstimate set_gap_estimate(const SigmaBlocks& s, int L, const BallSet& balls, double density,
                                       bool polish = true) {
  balls.validate();
  detail::require_density(balls, density);
  detail::check_cutoff(s, L);
  SetGapEstimate r;
  r.inside = r.outside = -std::numeric_limits<double>::infinity();
  const So3Grid g = grid_eval(s, L, detail::grid_factor(L, density));
  r.density = g.n_alpha / kTwoPi;
  for (long i = 0; i < g.size(); ++i) {
    const double v = g.values[i];
    if (v <= r.inside && v <= r.outside) continue;
    const EulerZYZ e = g.node(i);
    if (balls.locate(e) >= 0) {
      if (v > r.inside) r.inside = v, r.arg_inside = e;
    } else if (v > r.outside) {
      r.outside = v, r.arg_outside = e;
    }
  }
  for (const EulerZYZ& e : detail::ball_samples(balls, density)) {
    const double v = eval_CL(s, L, e);
    if (v > r.inside) r.inside = v, r.arg_inside = e;
  }
  if (polish) {
    const Candidate in = detail::polish_max(s, L, r.arg_inside);
    if (in.score > r.inside && balls.locate(in.rotation) >= 0) r.inside = in.score, r.arg_inside = in.rotation;
    if (std::isfinite(r.outside)) {
      const Candidate out = detail::polish_max(s, L, r.arg_outside);
      if (out.score > r.outside && balls.locate(out.rotation) < 0) r.outside = out.score, r.arg_outside = out.rotation;
    }
  }
  r.gamma = r.inside - r.outside;
  return r;
}

inline double set_gap(const SigmaBlocks& s, int L, const BallSet& balls, double density) {
  return set_gap_estimate(s, L, balls, density).gamma;
}

struct StepNorms {
  double a = 0;      // sup over S of |grad E|
  double b = 0;      // sup over S of |Hess E|_op
  double delta = 0;  // sup over SO(3) of |E|
  double density = 0;
};

namespace detail {

/// As step_norms, with the global grid built for band L_grid >= L_next so that several
/// steps can share one sample set.
inline StepNorms step_norms_on(const SigmaBlocks& s, int L_prev, int L_next, const BallSet& balls, double density,
                               bool polish, int L_grid) {
  if (L_prev < 0 || L_prev > L_next) throw ConfigError("step_norms needs 0 <= L_prev <= L_next");
  check_cutoff(s, L_next);
  balls.validate();
  require_density(balls, density);
  StepNorms r;
  const int K = grid_factor(L_grid, density);
  r.density = 2 * K * (L_grid + 1) / kTwoPi;
  if (L_prev == L_next) return r;
  const SigmaBlocks e = band_slice(s, L_prev, L_next, L_grid);
  for (const EulerZYZ& g : ball_samples(balls, density)) {
    const CorrelationEval ev = eval_CL_intrinsic(e, L_next, g);
    r.a = std::max(r.a, ev.gradient.norm());
    r.b = std::max(r.b, hessian_op_norm(ev.hessian));
  }
  const So3Grid grid = grid_eval(e, L_grid, K);
  long best = 0;
  for (long i = 0; i < grid.size(); ++i)
    if (std::abs(grid.values[i]) > std::abs(grid.values[best])) best = i;
  r.delta = std::abs(grid.values[best]);
  if (polish && r.delta > 0) {
    const double sign = grid.values[best] > 0 ? 1.0 : -1.0;
    const Candidate c = polish_max(scaled(e, sign), L_next, grid.node(best));
    r.delta = std::max(r.delta, c.score);
  }
  return r;
}

}  // namespace detail

/// a_j, b_j over the balls and delta_j over SO(3) for E = C_{L_next} - C_{L_prev}.
inline StepNorms step_norms(const SigmaBlocks& s, int L_prev, int L_next, const BallSet& balls, double density,
                            bool polish = true) {
  return detail::step_norms_on(s, L_prev, L_next, balls, density, polish, L_next);
}

struct BernsteinRatio {
  double ratio1 = 0, ratio2 = 0;
  double sup_f = 0, sup_grad = 0, sup_hess = 0;
  double density = 0;
};

/// Sampled |grad F|_inf / ((1+L)|F|_inf) and |Hess F|_inf / ((1+L)^2 |F|_inf) for F = C_L, all
/// on one global grid (derivatives are evaluated as band-L functions of their own); |F|_inf
/// is polished from the best node.
inline BernsteinRatio bernstein_ratio(const SigmaBlocks& s, int L, double density) {
  detail::check_cutoff(s, L);
  if (!(density > 0)) throw ConfigError("density must be positive");
  const int K = detail::grid_factor(L, density);
  BernsteinRatio r;
  const So3Grid f = grid_eval(s, L, K);
  r.density = f.n_alpha / kTwoPi;
  long best = 0;
  for (long i = 0; i < f.size(); ++i)
    if (std::abs(f.values[i]) > std::abs(f.values[best])) best = i;
  r.sup_f = std::abs(f.values[best]);
  if (r.sup_f == 0.0) return r;
  {
    const double sign = f.values[best] > 0 ? 1.0 : -1.0;
    r.sup_f = std::max(r.sup_f, detail::polish_max(detail::scaled(s, sign), L, f.node(best)).score);
  }
  const std::vector<SigmaBlocks> d = detail::derivative_blocks(s, L);
  std::vector<So3Grid> g;
  for (const SigmaBlocks& b : d) g.push_back(grid_eval(b, L, K));
  for (long i = 0; i < f.size(); ++i) {
    const Vec3 grad(g[0].values[i], g[1].values[i], g[2].values[i]);
    Mat3 h;
    h << g[3].values[i], g[6].values[i], g[7].values[i],  //
        g[6].values[i], g[4].values[i], g[8].values[i],   //
        g[7].values[i], g[8].values[i], g[5].values[i];
    r.sup_grad = std::max(r.sup_grad, grad.norm());
    r.sup_hess = std::max(r.sup_hess, detail::hessian_op_norm(h));
  }
  r.ratio1 = r.sup_grad / ((1.0 + L) * r.sup_f);
  r.ratio2 = r.sup_hess / ((1.0 + L) * (1.0 + L) * r.sup_f);
  return r;
}

/// sqrt(sum L_j^2 delta_j / sum delta_j).
inline double effective_bandwidth(const std::vector<double>& deltas, const std::vector<int>& bands) {
  if (deltas.size() != bands.size() || deltas.empty()) throw ConfigError("deltas and bands must match in length");
  double num = 0, den = 0;
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    if (!(deltas[j] >= 0)) throw ConfigError("deltas must be non-negative");
    num += double(bands[j]) * bands[j] * deltas[j];
    den += deltas[j];
  }
  if (den == 0.0) throw AllZeroDeltas("all step sizes are zero");
  return std::sqrt(num / den);
}

struct StepReport {
  int L_prev = 0, L_next = 0;
  double a = 0, b = 0, delta = 0;
};

struct DiagnosticsReport {
  int schema_version = 1;
  double density = 0;  // requested samples per radian
  double radius = 0;
  std::vector<EulerZYZ> centers;
  std::vector<int> bands;
  double tau = 0;

  double gamma_set = 0;  // Gamma_{F_0}(S)
  std::vector<StepReport> steps;
  double delta_total = 0;
  double mu_hat = 0;
  double M_J_hat = 0;
  double L_bar2 = 0;  // NaN when every delta_j is zero
  double bernstein_B1 = 0, bernstein_B2 = 0;

  double drift = 0;  // sum 2 a_j / mu, compared with r / 2
  double gamma_hat = 0;  // inter-basin gap at L_J (inf for a single ball)
  int p_star = 0;
  std::vector<double> basin_values;
  std::vector<EulerZYZ> basin_maximizers;
  double suboptimality_bound = 0;  // M_J tau^2 / 2

  StepReport oneshot;  // E_tot = F_J - F_0 as a single step
  double marching_b_bernstein = 0;  // B2 sum (1+L_j)^2 delta_j
  double oneshot_b_bernstein = 0;   // B2 (1+L_J)^2 |E_tot|

  Flag flag_A = Flag::Inconclusive;
  Flag flag_B = Flag::Inconclusive;
  Flag flag_B_sum_b = Flag::Inconclusive, flag_B_a = Flag::Inconclusive, flag_B_drift = Flag::Inconclusive,
       flag_B_concave = Flag::Inconclusive;
  Flag flag_C = Flag::Inconclusive;
  Flag flag_F = Flag::Inconclusive;
  Flag flag_oneshot_B = Flag::Inconclusive;
  std::string selection;
};

/// Estimates every quantity in the assumptions of the selection guarantee for the bands of
/// `sched` and flags each inequality as holding, failing or inconclusive at this density.
/// Set-gap stability is checked in the form 2 sum delta_j < Gamma.
inline DiagnosticsReport check_theorem_conditions(const SigmaBlocks& s, const Schedule& sched, const BallSet& balls,
                                                  double density, double tau, bool polish = true) {
  balls.validate();
  detail::require_density(balls, density);
  if (!(tau >= 0)) throw ConfigError("tau must be non-negative");
  DiagnosticsReport r;
  r.bands = usable_bands(sched, s.l_max);
  r.density = density;
  r.radius = balls.radius;
  r.centers = balls.centers;
  r.tau = tau;
  const int L0 = r.bands.front(), LJ = r.bands.back();
  const double inf = std::numeric_limits<double>::infinity();

  r.gamma_set = set_gap_estimate(s, L0, balls, density, polish).gamma;

  std::vector<int> owner;
  const std::vector<EulerZYZ> samples = detail::ball_samples(balls, density, &owner);
  r.mu_hat = inf;
  for (const EulerZYZ& g : samples) {
    const CorrelationEval e0 = eval_CL_intrinsic(s, L0, g);
    const CorrelationEval eJ = eval_CL_intrinsic(s, LJ, g);
    r.mu_hat = std::min(r.mu_hat, -Eigen::SelfAdjointEigenSolver<Mat3>(e0.hessian).eigenvalues().maxCoeff());
    r.M_J_hat = std::max(r.M_J_hat, detail::hessian_op_norm(eJ.hessian));
  }

  // (A): each centre is the sampled maximiser of F_0 on its ball
  std::vector<double> center_value(balls.centers.size()), ball_max(balls.centers.size(), -inf);
  for (std::size_t p = 0; p < balls.centers.size(); ++p) center_value[p] = eval_CL(s, L0, balls.centers[p]);
  for (std::size_t i = 0; i < samples.size(); ++i)
    ball_max[owner[i]] = std::max(ball_max[owner[i]], eval_CL(s, L0, samples[i]));
  {
    Flag a = Flag::Holds;
    for (std::size_t p = 0; p < balls.centers.size(); ++p) {
      const double excess = ball_max[p] - center_value[p];
      const double scale = std::max(1e-300, std::abs(center_value[p]));
      if (excess > kSamplingSlack * scale) a = Flag::Fails;
      else if (excess > 1e-12 * scale && a == Flag::Holds) a = Flag::Inconclusive;
    }
    r.flag_A = r.mu_hat > 0 ? a : all_of({a, Flag::Inconclusive});
  }

  std::vector<double> deltas;
  std::vector<int> step_bands;
  for (std::size_t j = 1; j < r.bands.size(); ++j) {
    const StepNorms n = detail::step_norms_on(s, r.bands[j - 1], r.bands[j], balls, density, polish, LJ);
    r.steps.push_back({r.bands[j - 1], r.bands[j], n.a, n.b, n.delta});
    deltas.push_back(n.delta);
    step_bands.push_back(r.bands[j]);
    r.delta_total += n.delta;
  }
  double sum_b = 0, max_a = 0, sum_a = 0;
  for (const StepReport& st : r.steps) {
    sum_b += st.b;
    sum_a += st.a;
    max_a = std::max(max_a, st.a);
    if (st.delta > 0) {
      r.bernstein_B1 = std::max(r.bernstein_B1, st.a / ((1.0 + st.L_next) * st.delta));
      r.bernstein_B2 = std::max(r.bernstein_B2, st.b / ((1.0 + st.L_next) * (1.0 + st.L_next) * st.delta));
    }
  }
  r.L_bar2 = r.delta_total > 0 ? effective_bandwidth(deltas, step_bands) : std::numeric_limits<double>::quiet_NaN();

  const double mu = r.mu_hat;
  r.flag_B_concave = mu > 0 ? Flag::Holds : Flag::Fails;
  if (mu > 0) {
    r.drift = 2 * sum_a / mu;
    r.flag_B_sum_b = compare_le(sum_b, mu / 2);
    r.flag_B_a = r.steps.empty() ? Flag::Holds : compare_le(max_a, mu * balls.radius / 8);
    r.flag_B_drift = compare_le(r.drift, balls.radius / 2);
  } else {
    r.drift = inf;
    r.flag_B_sum_b = r.flag_B_a = r.flag_B_drift = Flag::Fails;
  }
  r.flag_B = all_of({r.flag_B_concave, r.flag_B_sum_b, r.flag_B_a, r.flag_B_drift});
  r.flag_C = r.gamma_set > 0 ? compare_le(2 * r.delta_total, r.gamma_set) : Flag::Fails;

  // one-shot comparison: E_tot = F_J - F_0 in a single step
  {
    const StepNorms n = detail::step_norms_on(s, L0, LJ, balls, density, polish, LJ);
    r.oneshot = {L0, LJ, n.a, n.b, n.delta};
    for (const StepReport& st : r.steps)
      r.marching_b_bernstein += r.bernstein_B2 * (1.0 + st.L_next) * (1.0 + st.L_next) * st.delta;
    r.oneshot_b_bernstein = r.bernstein_B2 * (1.0 + LJ) * (1.0 + LJ) * n.delta;
    r.flag_oneshot_B = mu > 0 ? compare_le(r.oneshot_b_bernstein, mu / 2) : Flag::Fails;
  }

  // basin maximisers of F_J, inter-basin gap and winner
  for (std::size_t p = 0; p < balls.centers.size(); ++p) {
    Candidate c = detail::polish_max(s, LJ, balls.centers[p]);
    if (geodesic_distance(c.rotation, balls.centers[p]) > balls.radius) {
      c.rotation = balls.centers[p];
      c.score = eval_CL(s, LJ, c.rotation);
      for (std::size_t i = 0; i < samples.size(); ++i)
        if (owner[i] == int(p)) {
          const double v = eval_CL(s, LJ, samples[i]);
          if (v > c.score) c.score = v, c.rotation = samples[i];
        }
    }
    r.basin_values.push_back(c.score);
    r.basin_maximizers.push_back(c.rotation);
  }
  r.p_star = int(std::max_element(r.basin_values.begin(), r.basin_values.end()) - r.basin_values.begin());
  double second = -inf;
  for (std::size_t p = 0; p < r.basin_values.size(); ++p)
    if (int(p) != r.p_star) second = std::max(second, r.basin_values[p]);
  r.gamma_hat = r.basin_values[r.p_star] - second;
  r.suboptimality_bound = 0.5 * r.M_J_hat * tau * tau;
  r.flag_F = r.gamma_hat > 0 ? compare_le(r.suboptimality_bound, r.gamma_hat / 4) : Flag::Fails;

  const Flag all = all_of({r.flag_A, r.flag_B, r.flag_C, r.flag_F});
  if (all == Flag::Holds)
    r.selection = "near-optimal selection guaranteed at this density";
  else if (r.flag_F != Flag::Holds)
    r.selection = "inconclusive selection";
  else
    r.selection = "assumptions not established at this density";
  return r;
}

namespace detail {
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
inline nlohmann::json euler_json(const EulerZYZ& e) {
  return {{"alpha", e.alpha()}, {"beta", e.beta()}, {"gamma", e.gamma()}};
}
inline nlohmann::json step_json(const StepReport& s) {
  return {{"L_prev", s.L_prev}, {"L_next", s.L_next}, {"a", s.a}, {"b", s.b}, {"delta", s.delta}};
}
}  // namespace detail

/// Structured report; non-finite values are written as null, angles in radians.
inline nlohmann::json to_json(const DiagnosticsReport& r) {
  using detail::finite_or_null;
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["density"] = r.density;
  j["sampling_slack"] = kSamplingSlack;
  j["radius"] = r.radius;
  j["centers"] = nlohmann::json::array();
  for (const EulerZYZ& e : r.centers) j["centers"].push_back(detail::euler_json(e));
  j["bands"] = r.bands;
  j["tau"] = r.tau;
  j["gamma_set"] = finite_or_null(r.gamma_set);
  j["steps"] = nlohmann::json::array();
  for (const StepReport& s : r.steps) j["steps"].push_back(detail::step_json(s));
  j["delta_total"] = r.delta_total;
  j["mu_hat"] = finite_or_null(r.mu_hat);
  j["M_J_hat"] = r.M_J_hat;
  j["L_bar2"] = finite_or_null(r.L_bar2);
  j["bernstein_B1"] = r.bernstein_B1;
  j["bernstein_B2"] = r.bernstein_B2;
  j["drift"] = finite_or_null(r.drift);
  j["gamma_hat"] = finite_or_null(r.gamma_hat);
  j["p_star"] = r.p_star;
  j["basin_values"] = r.basin_values;
  j["basin_maximizers"] = nlohmann::json::array();
  for (const EulerZYZ& e : r.basin_maximizers) j["basin_maximizers"].push_back(detail::euler_json(e));
  j["suboptimality_bound"] = r.suboptimality_bound;
  j["oneshot"] = detail::step_json(r.oneshot);
  j["marching_b_bernstein"] = r.marching_b_bernstein;
  j["oneshot_b_bernstein"] = r.oneshot_b_bernstein;
  j["flags"] = {{"A", to_string(r.flag_A)},
                {"B", to_string(r.flag_B)},
                {"B_concave", to_string(r.flag_B_concave)},
                {"B_sum_b", to_string(r.flag_B_sum_b)},
                {"B_a", to_string(r.flag_B_a)},
                {"B_drift", to_string(r.flag_B_drift)},
                {"C", to_string(r.flag_C)},
                {"F", to_string(r.flag_F)},
                {"oneshot_B", to_string(r.flag_oneshot_B)}};
  j["selection"] = r.selection;
  return j;
}

/// Balls at the top-N_C coarse candidates, polished at L_0, with r = 2x the grid spacing;
/// candidates closer than 2r to an accepted one are dropped.
inline BallSet auto_balls(const SigmaBlocks& s, int L0, int K, int N_C) {
  const So3Grid g = grid_eval(s, L0, K);
  BallSet b;
  b.radius = 2 * g.spacing();
  for (const Candidate& c : find_local_maxima(g, N_C)) {
    const EulerZYZ e = detail::polish_max(s, L0, c.rotation).rotation;
    bool ok = true;
    for (const EulerZYZ& o : b.centers)
      if (geodesic_distance(o, e) <= 2 * b.radius) ok = false;
    if (ok) b.centers.push_back(e);
  }
  return b;
}

}  // namespace matcha
