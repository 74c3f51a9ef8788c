// matcha: rigid alignment of 3D volumes from the command line.
//
// Exit codes: 0 success, 2 configuration, 3 I/O, 4 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <iostream>

#include "matcha/matcha.hpp"

using namespace matcha;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2, kExitIo = 3, kExitNumeric = 4;

/// JSON config files: top-level keys are options of the main command, nested objects
/// hold the options of a subcommand, e.g. {"threads": 2, "align": {"bands": [8, 12]}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(v, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array())
        for (const json& e : v) item.inputs.push_back(scalar(e));
      else
        item.inputs.push_back(scalar(v));
      out.push_back(std::move(item));
    }
  }
};

struct ScheduleArgs {
  std::string preset = "quick";
  std::vector<int> bands;
  int l_max = 60;  // final band of the paper preset
  int n_c = -1, k = -1, m_iter = -1;
  double lambda = 0;

  void add_to(CLI::App* app) {
    app->add_option("--preset", preset, "Operating point: quick (bands 8,12,16) or paper (30,40,60,L_max)")
        ->check(CLI::IsMember({"quick", "paper"}))
        ->capture_default_str();
    app->add_option("--bands", bands, "Marching bands, increasing (overrides the preset)")->delimiter(',');
    app->add_option("--l-max", l_max, "Final band of the paper preset")->capture_default_str();
    app->add_option("--n-c", n_c, "Number of coarse candidates (default 10)");
    app->add_option("--k", k, "Coarse grid oversampling factor (default 2)");
    app->add_option("--m-iter", m_iter, "Newton steps per band (default 1)");
    app->add_option("--lambda", lambda, "Frequency budget of the ball transform (default: just covers the last band)");
  }

  Schedule schedule() const {
    Schedule s;
    if (preset == "paper") s = paper_schedule(l_max);
    else s.bands = {8, 12, 16};
    if (!bands.empty()) s.bands = bands;
    if (n_c >= 0) s.N_C = n_c;
    if (k >= 0) s.K = k;
    if (m_iter >= 0) s.M_iter = m_iter;
    s.validate();
    return s;
  }

  std::shared_ptr<const TruncationIndex> truncation(const Schedule& s) const {
    const int L = s.bands.back();
    return build_truncation(lambda > 0 ? lambda : lambda_for_degree(L), L);
  }
};

struct InputArgs {
  std::string fixed, moving, format = "auto";
  int n = -1;

  void add_to(CLI::App* app, bool pair = true) {
    app->add_option("fixed", fixed, pair ? "Target volume f" : "Input volume")->required();
    if (pair) app->add_option("moving", moving, "Template volume h, aligned onto f")->required();
    app->add_option("--format", format, "Input format: auto, raw or mrc")
        ->check(CLI::IsMember({"auto", "raw", "mrc"}))
        ->capture_default_str();
    app->add_option("--n", n, "Side length of raw inputs without a sidecar");
  }

  Volume load(const std::string& p) const {
    Volume v = read_volume(p, parse_format(format), n);
    if (!v.all_finite()) throw NumericError(p + " contains non-finite values");
    return v;
  }
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_text_atomic(path, text);
}

json degrees(const EulerZYZ& e) {
  return {{"alpha", rad2deg(e.alpha())}, {"beta", rad2deg(e.beta())}, {"gamma", rad2deg(e.gamma())}};
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

struct AlignCmd {
  InputArgs in;
  ScheduleArgs sched;
  int translate = 0;
  int window = -1;
  std::string out;

  CLI::App* cmd = nullptr;

  void add_to(CLI::App& app) {
    auto* c = cmd = app.add_subcommand("align", "Estimate the rotation (and optionally shift) taking moving onto fixed");
    in.add_to(c);
    sched.add_to(c);
    c->add_option("--translate", translate, "Alternating rotation/translation iterations (0: rotation only)")
        ->check(CLI::NonNegativeNumber);
    c->add_option("--window", window, "Shift search half-width in voxels (default N/4)");
    c->add_option("-o,--output", out, "Result JSON (default stdout)");
  }

  void run() const {
    const Schedule s = sched.schedule();
    const Volume f = in.load(in.fixed), h = in.load(in.moving);
    if (f.n() != h.n()) throw ConfigError("volumes differ in size");
    const auto t0 = std::chrono::steady_clock::now();
    const auto t = sched.truncation(s);
    json j;
    if (translate > 0) {
      AlternationOptions opt;
      opt.T = translate;
      opt.window = window;
      const PoseResult r = alternate_align(f, h, s, t, opt);
      j["rotation"] = degrees(r.rotation);
      j["shift"] = {r.shift.tx, r.shift.ty, r.shift.tz};
      j["score"] = r.score_history.back();
      j["per_band_steps"] = r.rotations.back().per_band_steps;
      j["bands"] = r.rotations.back().bands;
      j["score_history"] = r.score_history;
    } else {
      const AlignmentResult r = matcha::matcha(forward_transform(f, t), forward_transform(h, t), s);
      j["rotation"] = degrees(r.rotation);
      j["shift"] = {0.0, 0.0, 0.0};
      j["score"] = r.score;
      j["per_band_steps"] = r.per_band_steps;
      j["bands"] = r.bands;
    }
    require_finite(j["score"].get<double>(), "score");
    j["lambda"] = t->lambda();
    j["time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit(out, j.dump(2) + "\n");
  }
};

struct BenchCmd {
  BenchConfig cfg;
  std::string preset = "quick", plant = "analytic", csv, summary;
  std::vector<std::string> snr;
  int n_c = -1, k = -1;

  CLI::App* cmd = nullptr;

  void add_to(CLI::App& app) {
    auto* c = cmd = app.add_subcommand("bench", "Planted-rotation benchmark with CSV output");
    c->add_option("--preset", preset, "quick (N=32, final band 16) or paper (bands 30,40,60,final)")
        ->check(CLI::IsMember({"quick", "paper"}))
        ->capture_default_str();
    c->add_option("--trials", cfg.trials, "Number of planted rotations")->capture_default_str();
    c->add_option("--n", cfg.n, "Volume side length")->capture_default_str();
    c->add_option("--snr", snr, "SNR levels in dB, comma separated; inf for noiseless")->delimiter(',');
    c->add_option("--final-bands", cfg.final_bands, "Final bands to sweep")->delimiter(',');
    c->add_option("--methods", cfg.methods, "Methods: matcha, grid")->delimiter(',');
    c->add_option("--n-c", n_c, "Number of coarse candidates (default 10)");
    c->add_option("--k", k, "Grid oversampling factor (default 2)");
    c->add_option("--m-iter", cfg.M_iter, "Newton steps per band")->capture_default_str();
    c->add_option("--lambda", cfg.lambda, "Frequency budget (default: just covers the largest band)");
    c->add_option("--seed", cfg.master_seed, "Master seed")->capture_default_str();
    c->add_option("--plant", plant, "Render rotated volumes analytically or by trilinear interpolation")
        ->check(CLI::IsMember({"analytic", "trilinear"}))
        ->capture_default_str();
    c->add_flag("--deterministic", cfg.deterministic, "Write 0 in the time column so output is byte-stable");
    c->add_option("--csv", csv, "Per-trial CSV (default stdout)");
    c->add_option("--summary", summary, "Percentile summary JSON");
  }

  void run() {
    if (preset == "paper") {
      cfg.L0 = 30;
      cfg.marching = {30, 40, 60};
      if (cfg.final_bands == std::vector<int>{16}) cfg.final_bands = {60};
    }
    if (n_c >= 0) cfg.N_C = n_c;
    if (k >= 0) cfg.K = k;
    cfg.plant = plant == "trilinear" ? PlantMode::Trilinear : PlantMode::Analytic;
    if (!snr.empty()) {
      cfg.snr_db.clear();
      for (const std::string& s : snr) {
        if (s == "inf" || s == "+inf") {
          cfg.snr_db.push_back(std::numeric_limits<double>::infinity());
          continue;
        }
        try {
          std::size_t pos = 0;
          cfg.snr_db.push_back(std::stod(s, &pos));
          if (pos != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
          throw ConfigError("bad SNR level '" + s + "'");
        }
      }
    }
    const std::vector<BenchRecord> rs = bench_run(cfg);
    for (const BenchRecord& r : rs) require_finite(r.error_deg, "angular error");
    emit(csv, to_csv(rs));
    if (!summary.empty()) write_text_atomic(summary, summary_json(rs, cfg).dump(2) + "\n");
  }
};

struct DiagnoseCmd {
  InputArgs in;
  ScheduleArgs sched;
  std::vector<double> center;
  double radius = 0;
  double density = 0;
  double tau_deg = 0.1;
  std::string out;

  CLI::App* cmd = nullptr;

  void add_to(CLI::App& app) {
    auto* c = cmd = app.add_subcommand("diagnose", "Estimate the quantities behind the marching guarantee");
    in.add_to(c);
    sched.add_to(c);
    c->add_option("--center", center, "Single ball centre alpha,beta,gamma in degrees (default: auto)")
        ->delimiter(',')
        ->expected(3);
    c->add_option("--radius", radius, "Ball radius in radians (default: twice the coarse grid spacing)");
    c->add_option("--density", density, "Samples per radian (default 8/r)");
    c->add_option("--tau", tau_deg, "Newton tolerance in degrees")->capture_default_str();
    c->add_option("-o,--output", out, "Report JSON (default stdout)");
  }

  void run() const {
    const Schedule s = sched.schedule();
    const Volume f = in.load(in.fixed), h = in.load(in.moving);
    if (f.n() != h.n()) throw ConfigError("volumes differ in size");
    const auto t = sched.truncation(s);
    const std::vector<int> bands = usable_bands(s, t->l_max());
    const SigmaBlocks sig = compute_sigma(forward_transform(f, t), forward_transform(h, t), bands.back());
    BallSet balls;
    if (!center.empty()) {
      balls.centers = {EulerZYZ(deg2rad(center[0]), deg2rad(center[1]), deg2rad(center[2]))};
      balls.radius = radius > 0 ? radius : 2 * kTwoPi / (2 * s.K * (bands.front() + 1));
    } else {
      balls = auto_balls(sig, bands.front(), s.K, s.N_C);
      if (radius > 0) balls.radius = radius;
    }
    balls.validate();
    const double d = density > 0 ? density : 8.0 / balls.radius;
    json j;
    if (1.0 / d >= balls.radius / 4) {
      j["schema_version"] = 1;
      j["density"] = d;
      j["radius"] = balls.radius;
      j["bands"] = bands;
      j["tau"] = deg2rad(tau_deg);
      j["flags"] = {{"A", "inconclusive"}, {"B", "inconclusive"}, {"C", "inconclusive"}, {"F", "inconclusive"}};
      j["selection"] = "inconclusive selection";
      j["warning"] = "sampling density below 4/r; no estimates computed";
    } else {
      j = to_json(check_theorem_conditions(sig, s, balls, d, deg2rad(tau_deg)));
      j["warning"] = nullptr;
    }
    emit(out, j.dump(2) + "\n");
  }
};

struct TransformCmd {
  InputArgs in;
  double lambda = 0;
  int l_max = -1;
  std::string out;

  CLI::App* cmd = nullptr;

  void add_to(CLI::App& app) {
    auto* c = cmd = app.add_subcommand("transform", "Ball-harmonic analysis and resynthesis of a volume");
    in.add_to(c, false);
    c->add_option("--lambda", lambda, "Frequency budget (default N/3)");
    c->add_option("--l-max", l_max, "Cap on the angular degree");
    c->add_option("-o,--output", out, "Resynthesised volume (.mrc or raw)");
  }

  void run() const {
    const Volume v = in.load(in.fixed);
    const auto t = build_truncation(lambda > 0 ? lambda : v.n() / 3.0, l_max);
    const BallCoefficients c = forward_transform(v, t);
    const Volume back = synthesize(c, v.n());
    if (!back.all_finite()) throw NumericError("non-finite resynthesis");
    if (!out.empty()) write_volume(out, back);
    const json j = {{"n", v.n()},
                    {"lambda", t->lambda()},
                    {"l_max", t->l_max()},
                    {"coefficients", t->size()},
                    {"relative_l2", relative_l2(back, mask_ball(v))}};
    std::cout << j.dump(2) << "\n";
  }
};

struct InfoCmd {
  double lambda = 0;
  int n = 32;
  int l_max = -1;

  CLI::App* cmd = nullptr;

  void add_to(CLI::App& app) {
    auto* c = cmd = app.add_subcommand("info", "Print the truncation table of the ball transform");
    c->add_option("--lambda", lambda, "Frequency budget (default N/3)");
    c->add_option("--n", n, "Volume side length used for the default budget")->capture_default_str();
    c->add_option("--l-max", l_max, "Cap on the angular degree");
  }

  void run() const {
    const auto t = build_truncation(lambda > 0 ? lambda : n / 3.0, l_max);
    json rows = json::array();
    for (int l = 0; l <= t->l_max(); ++l) rows.push_back({{"l", l}, {"K_l", t->K(l)}, {"count", t->K(l) * (2 * l + 1)}});
    std::cout << json{{"lambda", t->lambda()}, {"l_max", t->l_max()}, {"coefficients", t->size()}, {"degrees", rows}}
                     .dump(2)
              << "\n";
  }
};

int set_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("MATCHA_THREADS"); env && *env) {
      try {
        std::size_t pos = 0;
        threads = std::stoi(env, &pos);
        if (pos != std::strlen(env) || threads <= 0) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        std::cerr << "error: MATCHA_THREADS must be a positive integer\n";
        return kExitConfig;
      }
    }
  }
  if (threads > 0) omp_set_num_threads(threads);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matcha: rigid 3D volume alignment by band-limited SO(3) correlation", "matcha"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values; command-line flags take precedence");
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (falls back to MATCHA_THREADS)");
  app.set_version_flag("--version", "matcha 0.1.0");

  AlignCmd align;
  BenchCmd bench;
  DiagnoseCmd diagnose;
  TransformCmd transform;
  InfoCmd info;
  align.add_to(app);
  bench.add_to(app);
  diagnose.add_to(app);
  transform.add_to(app);
  info.add_to(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (int rc = set_threads(threads)) return rc;

  try {
    if (*align.cmd) align.run();
    else if (*bench.cmd) bench.run();
    else if (*diagnose.cmd) diagnose.run();
    else if (*transform.cmd) transform.run();
    else if (*info.cmd) info.run();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ZeroSignal& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NotARotation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kExitNumeric;
  }
  return 0;
}
