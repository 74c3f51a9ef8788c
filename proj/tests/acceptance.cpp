// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "matcha/matcha.hpp"

using namespace matcha;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

SigmaBlocks random_sigma(int L, Rng& rng) {
  std::normal_distribution<double> n(0, 1);
  std::vector<CMatX> b(L + 1);
  for (int l = 0; l <= L; ++l) {
    b[l] = CMatX(2 * l + 1, 2 * l + 1);
    for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l].data()[i] = {n(rng), n(rng)};
  }
  return make_sigma(std::move(b), "random");
}

SigmaBlocks random_real_sigma(int L, Rng& rng) {
  std::normal_distribution<double> n(0, 1);
  std::vector<CMatX> b(L + 1);
  for (int l = 0; l <= L; ++l) {
    const int d = 2 * l + 1;
    CMatX a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {n(rng), n(rng)};
    b[l] = CMatX(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        b[l](i, j) = 0.5 * (a(i, j) + ((i + j) % 2 ? -1.0 : 1.0) * std::conj(a(d - 1 - i, d - 1 - j)));
  }
  return make_sigma(std::move(b), "random");
}

EulerZYZ interior(Rng& rng) { return fixture::interior_rotation(rng, 0.2); }

// 1 -------------------------------------------------------------------------------------
Outcome derivatives() {
  Rng rng(101);
  std::uniform_int_distribution<int> ud(1, 16);
  double wg = 0, wh = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int L = ud(rng);
    const SigmaBlocks s = random_sigma(L, rng);
    const EulerZYZ e = interior(rng);
    const CorrelationEval ev = eval_CL_full(s, L, e);
    const Vec3 th = e.as_vector();
    auto f = [&](const Vec3& x) { return eval_CL(s, L, EulerZYZ::from_vector(x)); };
    Vec3 fd;
    const double h1 = 1e-5, h2 = 1e-4;
    for (int i = 0; i < 3; ++i) fd[i] = (f(th + h1 * Vec3::Unit(i)) - f(th - h1 * Vec3::Unit(i))) / (2 * h1);
    Mat3 fh;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const Vec3 di = h2 * Vec3::Unit(i), dj = h2 * Vec3::Unit(j);
        fh(i, j) = (f(th + di + dj) - f(th + di - dj) - f(th - di + dj) + f(th - di - dj)) / (4 * h2 * h2);
      }
    wg = std::max(wg, (ev.gradient - fd).norm() / std::max(fd.norm(), 1e-300));
    wh = std::max(wh, (ev.hessian - fh).norm() / std::max(fh.norm(), 1e-300));
  }
  return {wg < 1e-6 && wh < 1e-4,
          "max rel err gradient " + fmt("%.2e", wg) + " (< 1e-6), Hessian " + fmt("%.2e", wh) + " (< 1e-4), 100 cases"};
}

// 2 -------------------------------------------------------------------------------------
Outcome wigner_validity() {
  Rng rng(102);
  double unit = 0, rep = 0;
  bool alpha_exact = true;
  for (int trial = 0; trial < 5; ++trial) {
    const EulerZYZ e = random_euler(rng);
    for (int l = 0; l <= 64; ++l) {
      const CMatX d = wigner_D(l, e).D;
      unit = std::max(unit, (d * d.adjoint() - CMatX::Identity(2 * l + 1, 2 * l + 1)).cwiseAbs().maxCoeff());
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    const EulerZYZ g1 = random_euler(rng), g2 = random_euler(rng);
    const EulerZYZ g12 = compose(g1, g2);
    for (int l = 0; l <= 16; ++l)
      rep = std::max(rep, (wigner_D(l, g12).D - wigner_D(l, g1).D * wigner_D(l, g2).D).cwiseAbs().maxCoeff());
    for (int l : {1, 5, 16}) {
      const WignerDBlock d = wigner_D(l, g1);
      const WignerDGradient g = d_wigner_D(l, g1);
      for (int m = -l; m <= l; ++m)
        for (int mp = -l; mp <= l; ++mp)
          if (g.alpha(m, mp) != cdouble(0, -m) * d(m, mp)) alpha_exact = false;
    }
  }
  return {unit < 1e-10 && rep < 1e-9 && alpha_exact,
          "unitarity " + fmt("%.2e", unit) + " (< 1e-10, l <= 64), representation " + fmt("%.2e", rep) +
              " (< 1e-9, l <= 16), d/dalpha identity " + (alpha_exact ? "exact" : "NOT exact")};
}

// 3 -------------------------------------------------------------------------------------
Outcome grid_consistency() {
  Rng rng(103);
  double worst = 0;
  for (int L0 : {8, 12})
    for (int K : {1, 2}) {
      const SigmaBlocks s = random_real_sigma(L0, rng);
      const So3Grid g = grid_eval(s, L0, K);
      std::uniform_int_distribution<long> ui(0, g.size() - 1);
      for (int t = 0; t < 20; ++t) {
        const long i = ui(rng);
        worst = std::max(worst, std::abs(g.values[i] - eval_CL(s, L0, g.node(i))));
      }
    }
  return {worst < 1e-9, "max |grid - pointwise| " + fmt("%.2e", worst) + " (< 1e-9) over 80 nodes"};
}

// 4 -------------------------------------------------------------------------------------
EulerZYZ local_scan(const SigmaBlocks& s, int L, const EulerZYZ& c, double half, double step) {
  EulerZYZ best = c;
  double bv = eval_CL(s, L, c);
  const int n = int(std::round(half / step));
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        const EulerZYZ e = EulerZYZ::from_vector(c.as_vector() + step * Vec3(i, j, k));
        const double v = eval_CL(s, L, e);
        if (v > bv) bv = v, best = e;
      }
  return best;
}

/// Dense global grid, then two nested local scans around the best node.
EulerZYZ brute_force_max(const SigmaBlocks& s, int L) {
  const So3Grid g = grid_eval(s, L, 4);
  EulerZYZ e = g.node(grid_argmax(g));
  e = local_scan(s, L, e, g.spacing(), g.spacing() / 10);
  e = local_scan(s, L, e, g.spacing() / 10, g.spacing() / 100);
  return local_scan(s, L, e, g.spacing() / 100, g.spacing() / 1000);
}

Outcome oracle_alignment() {
  Schedule sched;
  sched.bands = {8, 12, 16};
  sched.N_C = 10;
  sched.K = 2;
  const auto t = build_truncation(lambda_for_degree(16), 16);
  int ok = 0;
  std::string audit;
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t seed = splitmix64(4000 + trial);
    Rng rng(seed);
    const EulerZYZ g = matrix_to_euler(random_rotation(rng));
    const Phantom p = make_phantom(seed, 32);
    const auto pair = fixture::planted_pair(p, 32, t, g);
    const SigmaBlocks s = compute_sigma(pair.f, pair.h, 16);
    const AlignmentResult r = matcha::matcha(s, sched);
    const double err = rad2deg(geodesic_distance(r.rotation, g));
    if (err < 0.1) {
      ++ok;
      continue;
    }
    const EulerZYZ bf = brute_force_max(s, 16);
    const double to_bf = rad2deg(geodesic_distance(r.rotation, bf));
    const double bf_err = rad2deg(geodesic_distance(bf, g));
    audit += "\n      trial " + std::to_string(trial) + ": error " + fmt("%.3f", err) + " deg; brute-force max is " +
             fmt("%.3f", bf_err) + " deg from truth and " + fmt("%.4f", to_bf) + " deg from matcha (" +
             (to_bf < 0.01 ? "landscape maximum itself is off" : "matcha missed the global maximum") + ")";
  }
  return {ok >= 95, std::to_string(ok) + "/100 within 0.1 deg (>= 95)" + audit};
}

// 5 -------------------------------------------------------------------------------------
Outcome noise_trend() {
  BenchConfig c;
  c.trials = 100;
  c.n = 32;
  c.snr_db = {0.0};
  c.final_bands = {12, 16, 20, 24};
  c.K = 2;
  c.master_seed = 5;
  c.deterministic = true;
  const std::vector<BenchCell> cells = summarize(bench_run(c));
  std::map<std::string, std::vector<double>> med, p90;
  for (const BenchCell& cell : cells) {
    med[cell.method].push_back(cell.p50);
    p90[cell.method].push_back(cell.p90);
  }
  bool monotone = true;
  std::string d;
  for (const auto& [m, v] : med) {
    d += m + " median";
    for (std::size_t i = 0; i < v.size(); ++i) {
      d += " " + fmt("%.3f", v[i]);
      if (i && v[i] > v[i - 1]) monotone = false;
    }
    d += "; ";
  }
  int better = 0;
  for (std::size_t i = 0; i < p90["matcha"].size(); ++i)
    if (p90["matcha"][i] <= p90["grid"][i]) ++better;
  const double frac = double(better) / double(p90["matcha"].size());
  d += "p90 matcha<=grid in " + std::to_string(better) + "/" + std::to_string(p90["matcha"].size()) + " cells (>= 90%)";
  return {monotone && frac >= 0.9, d + " [bands 12,16,20,24; 0 dB; 100 trials]"};
}

// 6 -------------------------------------------------------------------------------------
Outcome newton_vs_gradient() {
  const auto t = build_truncation(lambda_for_degree(16), 16);
  Rng rng(106);
  int ok = 0;
  const double target = deg2rad(1e-3);
  for (int trial = 0; trial < 50; ++trial) {
    const Phantom p = make_phantom(600 + trial, 32, fixture::smooth_phantom());
    const EulerZYZ g = fixture::interior_rotation(rng);
    const auto pair = fixture::steered_pair(p, t, g);
    const SigmaBlocks s = compute_sigma(pair.f, pair.h, 16);
    const EulerZYZ start = matrix_to_euler(perturb_rotation(euler_to_matrix(g), deg2rad(3.0), rng));
    RefineTrace tr;
    refine_candidate(s, 16, start, 3, {0, 0, 0}, nullptr, nullptr, &tr);
    int newton = -1;
    for (std::size_t k = 0; k < tr.iterates.size(); ++k)
      if (geodesic_distance(tr.iterates[k], g) < target) {
        newton = int(k) + 1;
        break;
      }
    if (newton < 1) continue;
    const Mat3 h0 = eval_CL_full(s, 16, start).hessian;
    const double eta = 1.0 / Eigen::SelfAdjointEigenSolver<Mat3>(h0).eigenvalues().cwiseAbs().maxCoeff();
    bool slower = true;
    for (const EulerZYZ& e : gradient_ascent(s, 16, start, eta, 5 * newton))
      if (geodesic_distance(e, g) < target) slower = false;
    if (slower) ++ok;
  }
  return {ok >= 45, std::to_string(ok) + "/50 trials: Newton within 1e-3 deg in <= 3 steps and gradient ascent not "
                                         "there after 5x as many (>= 45)"};
}

// 7 -------------------------------------------------------------------------------------
Outcome theory_suite() {
  std::string d;
  bool pass = true;
  {  // (a)
    Rng rng(107);
    const auto t = build_truncation(18.0);
    bool ok = true;
    for (int trial = 0; trial < 5; ++trial) {
      std::normal_distribution<double> n(0, 1);
      CVecX a(t->size()), b(t->size());
      for (int i = 0; i < t->size(); ++i) a[i] = {n(rng), n(rng)}, b[i] = {n(rng), n(rng)};
      const BallCoefficients f{t, a}, h{t, b};
      const SigmaBlocks s0 = compute_sigma(f, h);
      const SigmaBlocks s1 = compute_sigma(f, rotate_coefficients(h, random_euler(rng)));
      for (int l = 0; l <= s0.l_max; ++l)
        if (numerical_rank(s0[l]) > t->K(l) || numerical_rank(s1[l]) != numerical_rank(s0[l])) ok = false;
    }
    pass &= ok;
    d += std::string("(a) rank bound and invariance ") + (ok ? "hold" : "VIOLATED");
  }
  {  // (b)
    const double L0 = 30, D = 10, q = 0.5;
    std::vector<double> dl;
    std::vector<int> bands;
    for (int j = 0; j < 200; ++j) bands.push_back(int(L0 + j * D)), dl.push_back(std::pow(q, j));
    const double closed = L0 * L0 + 2 * L0 * D * q / (1 - q) + D * D * q * (1 + q) / ((1 - q) * (1 - q));
    const double lb = effective_bandwidth(dl, bands);
    const double rel = std::abs(lb * lb - closed) / closed;
    pass &= rel < 1e-6;
    d += "; (b) toy L_bar2^2 rel err " + fmt("%.1e", rel);
  }
  {  // (c)
    Rng rng(108);
    const int L = 8;
    const EulerZYZ g1 = fixture::interior_rotation(rng);
    const EulerZYZ g2 = matrix_to_euler(euler_to_matrix(g1) * exp_so3(Vec3(-1.1, 0.9, 0.7)));
    const SigmaBlocks s = fixture::character_sigma({{g1, 1.0}, {g2, 0.7}}, fixture::fejer(L));
    BallSet b;
    b.centers = {g1};
    b.radius = 0.25;
    const double gamma = set_gap(s, L, b, 20);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    int inside = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const SigmaBlocks e = random_real_sigma(L, rng);
      const So3Grid eg = grid_eval(e, L, 4);
      double sup = 0;
      for (double v : eg.values) sup = std::max(sup, std::abs(v));
      const double eps = u(rng) * gamma / 2;
      std::vector<CMatX> pb(L + 1);
      for (int l = 0; l <= L; ++l) pb[l] = s.blocks[l] + (eps / sup) * e.blocks[l];
      const SigmaBlocks p = make_sigma(std::move(pb));
      const So3Grid pg = grid_eval(p, L, 4);
      const long i = grid_argmax(pg);
      Candidate m = refine_candidate(p, L, pg.node(i), 25);
      if (pg.values[i] > m.score) m.rotation = pg.node(i);
      if (b.locate(m.rotation) >= 0) ++inside;
    }
    pass &= gamma > 0 && inside == 100;
    d += "; (c) perturbed max inside S in " + std::to_string(inside) + "/100";
  }
  {  // (d)
    const auto t = build_truncation(22.0);
    const Phantom p = make_phantom(21, 32, fixture::smooth_phantom());
    const BallCoefficients h = forward_transform(p.volume, t);
    const SigmaBlocks s = compute_sigma(h, h, 12);
    Schedule sched;
    sched.bands = {8, 10, 12};
    sched.M_iter = 3;
    const double tau = deg2rad(0.1);
    BallSet b;
    b.centers = {EulerZYZ()};
    b.radius = 0.1;
    const DiagnosticsReport r = check_theorem_conditions(s, sched, b, 50, tau);
    const bool flags = r.flag_A == Flag::Holds && r.flag_B == Flag::Holds && r.flag_C == Flag::Holds && r.flag_F == Flag::Holds;
    const AlignmentResult a = matcha::matcha(s, sched);
    const EulerZYZ bf = brute_force_max(s, 12);
    const double dist = geodesic_distance(a.rotation, bf);
    const double sub = eval_CL(s, 12, bf) - a.score;
    const bool ok = flags && dist <= tau && sub <= r.suboptimality_bound + 1e-12 * std::abs(a.score);
    pass &= ok;
    d += std::string("; (d) flags A,B,C,F ") + (flags ? "hold" : "do not all hold") + ", distance to brute-force max " +
         fmt("%.2e", rad2deg(dist)) + " deg (tau 0.1), suboptimality " + fmt("%.2e", sub) + " <= " +
         fmt("%.2e", r.suboptimality_bound);
  }
  return {pass, d};
}

// 8 -------------------------------------------------------------------------------------
Volume roll_oracle(const Volume& v, int sx, int sy, int sz) {
  const int n = v.n();
  Volume out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out(i, j, k) = v((i - sx + n) % n, (j - sy + n) % n, (k - sz + n) % n);
  return out;
}

Outcome translation() {
  std::string d;
  bool pass = true;
  {
    const Volume v = make_phantom(801, 32).volume;
    int exact = 0;
    for (int a = -4; a <= 4; ++a)
      for (int b = -4; b <= 4; ++b)
        for (int c = -4; c <= 4; ++c) {
          const ShiftEstimate e = estimate_shift(v, roll_oracle(v, a, b, c), -1, SubpixelMode::None);
          if (e.shift == Shift3{double(a), double(b), double(c)}) ++exact;
        }
    pass &= exact == 729;
    d += "integer shifts exact " + std::to_string(exact) + "/729";
  }
  {
    double worst = 0;
    for (SubpixelMode mode : {SubpixelMode::Quadratic, SubpixelMode::Upsampled})
      for (int trial = 0; trial < 50; ++trial) {
        const Volume v = make_phantom(810 + trial, 32, fixture::smooth_phantom()).volume;
        const Volume h = add_noise(phase_shift(v, {0.5, 0, 0}), 20.0, 900 + trial);
        const Shift3 s = estimate_shift(v, h, -1, mode).shift;
        worst = std::max({worst, std::abs(s.tx - 0.5), std::abs(s.ty), std::abs(s.tz)});
      }
    pass &= worst < 0.1;
    d += "; subpixel max error " + fmt("%.3f", worst) + " voxel at 20 dB (< 0.1, 50 trials, quadratic and upsampled)";
  }
  {
    PhantomOptions o = fixture::smooth_phantom();
    o.max_center_radius = 0.3;
    o.taper_start = 0.4;
    o.taper_end = 0.7;
    const auto t = build_truncation(22.0);
    Schedule sched;
    sched.bands = {8, 12, 16};
    Rng rng(808);
    std::uniform_real_distribution<double> u(-3, 3);
    int monotone = 0;
    const int trials = 10;
    for (int trial = 0; trial < trials; ++trial) {
      const Phantom p = make_phantom(850 + trial, 32, o);
      const Volume f =
          add_noise(p.render(32, euler_to_matrix(random_euler(rng)), {u(rng), u(rng), u(rng)}), 0.0, 870 + trial);
      const PoseResult r = alternate_align(f, p.volume, sched, t);
      bool mono = true;
      for (std::size_t i = 1; i < r.score_history.size(); ++i)
        if (r.score_history[i] < r.score_history[i - 1]) mono = false;
      monotone += mono;
    }
    pass &= monotone == trials;
    d += "; alternation monotone in " + std::to_string(monotone) + "/" + std::to_string(trials) + " noisy trials";
  }
  return {pass, d};
}

// 9 -------------------------------------------------------------------------------------
int run_cli(const std::string& args) {
  const int status = std::system((std::string(MATCHA_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism_interfaces() {
  const fs::path dir = fs::temp_directory_path() / "matcha_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool pass = true;
  std::string d;

  BenchConfig c;
  c.trials = 5;
  c.final_bands = {8, 12};
  c.snr_db = {0.0};
  c.deterministic = true;
  const bool csv_same = to_csv(bench_run(c)) == to_csv(bench_run(c));
  Rng rng(909);
  const SigmaBlocks s = fixture::character_sigma({{fixture::interior_rotation(rng), 1.0}}, fixture::fejer(6));
  Schedule sched;
  sched.bands = {4, 6};
  BallSet b = auto_balls(s, 4, 2, 3);
  const bool json_same = to_json(check_theorem_conditions(s, sched, b, 8 / b.radius, 0.01)).dump() ==
                         to_json(check_theorem_conditions(s, sched, b, 8 / b.radius, 0.01)).dump();
  pass &= csv_same && json_same;
  d += std::string("bench CSV ") + (csv_same ? "identical" : "DIFFERS") + ", diagnostics JSON " +
       (json_same ? "identical" : "DIFFERS");

  Volume v(20);
  std::normal_distribution<double> n(0, 1);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(float(n(rng)));
  write_volume(dir / "a.raw", v);
  write_volume(dir / "a.mrc", v);
  write_volume(dir / "b.raw", read_volume(dir / "a.raw"));
  write_volume(dir / "b.mrc", read_volume(dir / "a.mrc"));
  const bool rt = read_volume(dir / "a.raw") == v && read_volume(dir / "a.mrc") == v &&
                  slurp(dir / "a.raw") == slurp(dir / "b.raw") && slurp(dir / "a.mrc") == slurp(dir / "b.mrc");
  pass &= rt;
  d += std::string("; raw/MRC round trips ") + (rt ? "bit-exact" : "NOT exact");

  write_volume(dir / "h.raw", make_phantom(910, 32).volume);
  Volume bad = make_phantom(911, 32).volume;
  bad[100] = std::numeric_limits<double>::quiet_NaN();
  write_volume(dir / "nan.raw", bad);
  const std::string h = (dir / "h.raw").string();
  const int codes[5] = {run_cli("--help"), run_cli("align " + h + " " + h + " --no-such-flag"),
                        run_cli("align " + h + " " + h + " --bands 12,8"),
                        run_cli("align " + (dir / "missing.raw").string() + " " + h),
                        run_cli("align " + (dir / "nan.raw").string() + " " + h)};
  const int expect[5] = {0, 2, 2, 3, 4};
  bool exit_ok = true;
  for (int i = 0; i < 5; ++i) exit_ok &= codes[i] == expect[i];
  pass &= exit_ok;
  d += "; CLI exit codes help/unknown flag/bad schedule/missing file/NaN = " + std::to_string(codes[0]) + "/" +
       std::to_string(codes[1]) + "/" + std::to_string(codes[2]) + "/" + std::to_string(codes[3]) + "/" +
       std::to_string(codes[4]) + " (expected 0/2/2/3/4)";
  fs::remove_all(dir);
  return {pass, d};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "derivative correctness", 60, derivatives},
      {2, "Wigner validity", 60, wigner_validity},
      {3, "grid/pointwise consistency", 60, grid_consistency},
      {4, "oracle alignment", 600, oracle_alignment},
      {5, "noise robustness trend", 1800, noise_trend},
      {6, "Newton vs gradient", 300, newton_vs_gradient},
      {7, "theory suite", 900, theory_suite},
      {8, "translation", 300, translation},
      {9, "determinism and interfaces", 300, determinism_interfaces},
  };
  int failed = 0;
  for (const Criterion& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool ok = o.pass && in_time;
    failed += !ok;
    std::printf("%s  %d  %s: %s [%.1f s, budget %.0f s%s]\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
