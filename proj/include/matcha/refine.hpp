#pragma once

// Safeguarded Newton refinement in the Euler chart and the frequency-marching
// orchestrator: coarse grid at L_0, then refinement of every candidate at L_1..L_J.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <set>
#include <string>
#include <vector>

#include "matcha/coarse_search.hpp"
#include "matcha/correlation.hpp"

namespace matcha {

struct Tolerances {
  double grad = 1e-8;   // relative to |C_L|
  double step = 1e-10;  // radians
  double obj = 1e-12;   // relative change of C_L
};

struct Schedule {
  std::vector<int> bands;  // L_0 < L_1 < ... < L_J
  int M_iter = 1;
  int N_C = 10;
  int K = 2;
  Tolerances tol;
  double tau_target = deg2rad(0.1);
  double merge_radius = -1;  // < 0: default (twice the grid spacing)

  void validate() const {
    if (bands.empty()) throw ConfigError("schedule needs at least one band");
    for (std::size_t i = 0; i < bands.size(); ++i) {
      if (bands[i] < 0) throw ConfigError("negative band");
      if (i && bands[i] <= bands[i - 1]) throw ConfigError("bands must be strictly increasing");
    }
    if (M_iter < 1) throw ConfigError("M_iter must be >= 1");
    if (N_C < 1) throw ConfigError("N_C must be >= 1");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (!(tol.grad >= 0 && tol.step >= 0 && tol.obj >= 0)) throw ConfigError("tolerances must be >= 0");
  }
};

/// Bands {30, 40, 60, L_max} with N_C = 10, K = 2 and one Newton step per band.
inline Schedule paper_schedule(int L_max) {
  Schedule s;
  std::set<int> b = {30, 40, 60, L_max};
  s.bands.assign(b.begin(), b.end());
  return s;
}

struct NewtonStep {
  EulerZYZ theta;
  bool accepted = false;
  bool regularized = false;
  double value_before = 0;
  double value = 0;
  double step_norm = 0;
  double grad_norm = 0;
  int halvings = 0;
};

/// One step theta - H^{-1} grad. A Hessian that is not negative definite is shifted
/// by -(lambda_max + eps_reg) I and the resulting step is capped at pi/(L+1); the step
/// is halved up to 5 times until C_L does not decrease (up to evaluation roundoff).
/// If no such step exists, theta is returned unchanged with accepted = false.
inline NewtonStep newton_step(const SigmaBlocks& s, int L, const EulerZYZ& theta, double eps_reg_rel = 1e-6) {
  const CorrelationEval ev = eval_CL_full(s, L, theta);
  NewtonStep r;
  r.theta = theta;
  r.value_before = r.value = ev.value;
  r.grad_norm = ev.gradient.norm();
  if (r.grad_norm == 0.0) {
    r.accepted = true;
    return r;
  }
  Mat3 H = ev.hessian;
  const Eigen::SelfAdjointEigenSolver<Mat3> es(H);
  const double lmax = es.eigenvalues().maxCoeff();
  const double hn = H.norm();
  const double eps = hn > 0 ? eps_reg_rel * hn : 1.0;
  if (lmax > -eps) {
    H -= (lmax + eps) * Mat3::Identity();
    r.regularized = true;
  }
  Vec3 delta = -H.ldlt().solve(ev.gradient);
  if (!delta.allFinite()) return r;
  const double cap = kPi / (L + 1);
  if (r.regularized && delta.norm() > cap) delta *= cap / delta.norm();
  const double floor = 1e-14 * std::max(1.0, s.frobenius_sum(L));
  const Vec3 th = theta.as_vector();
  double t = 1.0;
  for (int h = 0; h <= 5; ++h, t *= 0.5) {
    const EulerZYZ cand = EulerZYZ::from_vector(th + t * delta);
    const double v = eval_CL(s, L, cand);
    if (v >= ev.value - floor) {
      r.theta = cand;
      r.value = v;
      r.step_norm = t * delta.norm();
      r.accepted = true;
      r.halvings = h;
      return r;
    }
  }
  return r;
}

/// sigma' with C'(g) = C(g Q), Q the fixed 90 degree y-rotation: sigma'_l = sigma_l D^l(Q)^T.
inline const EulerZYZ& anchor_rotation() {
  static const EulerZYZ q(0.0, kPi / 2, 0.0);
  return q;
}

inline SigmaBlocks anchor_sigma(const SigmaBlocks& s) {
  std::vector<CMatX> b(s.blocks.size());
  for (std::size_t l = 0; l < b.size(); ++l) b[l] = s.blocks[l] * wigner_D(int(l), anchor_rotation()).D.transpose();
  SigmaBlocks a = make_sigma(std::move(b), s.provenance + "+anchored");
  a.real_valued = s.real_valued;
  return a;
}

inline bool near_pole(const EulerZYZ& e, double eps = 1e-6) { return e.beta() < eps || e.beta() > kPi - eps; }

struct RefineTrace {
  std::vector<EulerZYZ> iterates;  // world rotations after each accepted step
  std::vector<double> values;
};

/// Up to M_iter safeguarded Newton steps; stops on any tolerance or a rejected step.
/// Iterates within 1e-6 of a pole continue in the chart anchored at Q (and back).
inline Candidate refine_candidate(const SigmaBlocks& s, int L, const EulerZYZ& theta0, int M_iter,
                                  const Tolerances& tol = {}, const SigmaBlocks* anchored = nullptr,
                                  int* steps_taken = nullptr, RefineTrace* trace = nullptr) {
  if (M_iter < 1) throw ConfigError("M_iter must be >= 1");
  detail::check_cutoff(s, L);
  SigmaBlocks local;
  const RotationMatrix q = euler_to_matrix(anchor_rotation());
  bool in_anchor = false;
  EulerZYZ cur = theta0;
  auto world = [&](const EulerZYZ& c) { return in_anchor ? matrix_to_euler(euler_to_matrix(c) * q) : c; };
  int steps = 0;
  for (int it = 0; it < M_iter; ++it) {
    if (near_pole(cur)) {
      const RotationMatrix g = euler_to_matrix(world(cur));
      in_anchor = !in_anchor;
      cur = in_anchor ? matrix_to_euler(g * q.inverse()) : matrix_to_euler(g);
      if (in_anchor && !anchored) {
        local = anchor_sigma(s);
        anchored = &local;
      }
    }
    const SigmaBlocks& sig = in_anchor ? *anchored : s;
    const NewtonStep st = newton_step(sig, L, cur);
    if (!st.accepted) break;
    ++steps;
    cur = st.theta;
    if (trace) {
      trace->iterates.push_back(world(cur));
      trace->values.push_back(st.value);
    }
    const double scale = std::max(std::abs(st.value), 1e-300);
    if (st.grad_norm <= tol.grad * scale) break;
    if (st.step_norm <= tol.step) break;
    if (std::abs(st.value - st.value_before) <= tol.obj * scale) break;
  }
  Candidate c;
  c.rotation = world(cur);
  c.score = eval_CL(s, L, c.rotation);
  c.refined = true;
  c.band = L;
  if (steps_taken) *steps_taken = steps;
  return c;
}

/// Fixed-step gradient ascent in the Euler chart; the comparison baseline for Newton.
inline std::vector<EulerZYZ> gradient_ascent(const SigmaBlocks& s, int L, const EulerZYZ& theta0, double step,
                                             int iters) {
  std::vector<EulerZYZ> path{theta0};
  EulerZYZ cur = theta0;
  for (int i = 0; i < iters; ++i) {
    const CorrelationEval ev = eval_CL_full(s, L, cur);
    cur = EulerZYZ::from_vector(cur.as_vector() + step * ev.gradient);
    path.push_back(cur);
  }
  return path;
}

struct AlignmentResult {
  EulerZYZ rotation;
  double score = 0;
  std::vector<Candidate> candidates;
  std::vector<int> bands;           // bands actually used
  std::vector<int> per_band_steps;  // accepted Newton steps summed over candidates
  EulerZYZ coarse_rotation;         // best grid node
  double wall_time = 0;
};

/// Bands of the schedule that fit the available degree; throws if L_0 does not fit.
inline std::vector<int> usable_bands(const Schedule& sched, int available) {
  sched.validate();
  if (sched.bands.front() > available)
    throw CutoffExceedsBlocks("coarse band " + std::to_string(sched.bands.front()) +
                              " exceeds available degree " + std::to_string(available));
  std::vector<int> b;
  for (int L : sched.bands)
    if (L <= available) b.push_back(L);
  return b;
}

/// Coarse search and frequency marching on precomputed blocks.
inline AlignmentResult matcha(const SigmaBlocks& s, const Schedule& sched) {
  const auto t0 = std::chrono::steady_clock::now();
  AlignmentResult res;
  res.bands = usable_bands(sched, s.l_max);
  const int L0 = res.bands.front();
  const So3Grid grid = grid_eval(s, L0, sched.K);
  res.coarse_rotation = grid.node(grid_argmax(grid));
  std::vector<Candidate> cands = find_local_maxima(grid, sched.N_C, sched.merge_radius);
  const SigmaBlocks anchored = anchor_sigma(s);

  auto refine_all = [&](int L) {
    int total = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : total)
    for (long i = 0; i < long(cands.size()); ++i) {
      int steps = 0;
      Candidate r = refine_candidate(s, L, cands[i].rotation, sched.M_iter, sched.tol, &anchored, &steps);
      r.grid_index = cands[i].grid_index;
      r.history = cands[i].history;
      r.history.push_back({L, r.score});
      cands[i] = std::move(r);
      total += steps;
    }
    res.per_band_steps.push_back(total);
  };

  res.per_band_steps.push_back(0);
  if (res.bands.size() == 1) {
    res.per_band_steps.clear();
    refine_all(L0);
  } else {
    for (std::size_t j = 1; j < res.bands.size(); ++j) refine_all(res.bands[j]);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i)
    if (cands[i].score > cands[best].score) best = i;
  res.rotation = cands[best].rotation;
  res.score = cands[best].score;
  res.candidates = std::move(cands);
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Algorithm entry point on coefficient sets: sigma is formed once at the largest usable band.
inline AlignmentResult matcha(const BallCoefficients& fc, const BallCoefficients& hc, const Schedule& sched) {
  if (!fc.truncation || !hc.truncation || !fc.truncation->same_as(*hc.truncation))
    throw TruncationMismatch("coefficient sets use different truncations");
  const std::vector<int> bands = usable_bands(sched, fc.truncation->l_max());
  return matcha(compute_sigma(fc, hc, bands.back()), sched);
}

/// Baseline: best node of a single grid at band L with oversampling K.
inline EulerZYZ grid_search(const SigmaBlocks& s, int L, int K) {
  const So3Grid g = grid_eval(s, L, K);
  return g.node(grid_argmax(g));
}

}  // namespace matcha
