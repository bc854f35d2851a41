// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
// Exit status is the number of failed criteria (0 = all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "heterloss/baselines.hpp"
#include "heterloss/heatmap.hpp"
#include "heterloss/metrics.hpp"
#include "heterloss/model_io.hpp"
#include "heterloss/synthetic.hpp"
#include "heterloss/terrain.hpp"
#include "heterloss/training.hpp"
#include "json.hpp"

using namespace heterloss;
namespace fs = std::filesystem;

namespace {

// --- pinned tolerances -----------------------------------------------------
constexpr std::size_t kGradCases = 20;
constexpr double kGradSeconds = 30.0;
constexpr double kNllTol = 1e-9;
constexpr std::size_t kOracleRows = 100'000;
constexpr double kOraclePicpLo = 0.945, kOraclePicpHi = 0.955;
constexpr double kOracleMpiwRelTol = 1e-12;
constexpr double kOracleSeconds = 10.0;
constexpr std::size_t kRecoverySamplesPerFrequency = 12'500;  // 5 training groups -> 375k rows, 300k after 80/20
constexpr double kRecoveryPicpLo = 0.93, kRecoveryPicpHi = 0.97;
constexpr double kRecoveryCorr = 0.8;
constexpr double kRecoveryRmseGap = 1.5;
constexpr double kRecoverySeconds = 600.0;
constexpr double kContrastWidthSd = 1.0;
constexpr double kMomentLimit = 1.0;
constexpr std::size_t kNormalDraws = 1'000'000;
constexpr double kNormalMomentTol = 0.02;
constexpr double kTTol = 1e-3;
constexpr double kUmaTol = 0.01;
constexpr double kSlopeTol = 0.01;
constexpr double kMiniSeconds = 300.0;
constexpr double kHeatmapRange = 5.0;

// Independent hand evaluations of the UMa formulas (h_BS = 25 m, h_UT = 1.5 m, 2-D distance).
struct UmaSpot {
  double f_ghz, d_m, expected;
};
constexpr UmaSpot kUmaSpots[] = {
    {3.5, 100.0, 103.03752359006076}, {2.0, 1000.0, 136.80528507626195}, {0.9, 4000.0, 153.39364754836313}};
const double kNlosDoublingSlope = 39.08 * std::log10(2.0);  // 11.764 dB

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s  [%2d] %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double sd_of(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

PredictionSet hetero_predictions(const HeteroModel& m, const Dataset& data, std::span<const std::size_t> rows) {
  const auto preds = predict(m, apply(m.normalizer, data, rows));
  PredictionSet p;
  p.truth = data.targets(rows);
  for (const auto& g : preds) {
    p.mean.push_back(g.mean);
    p.sd.push_back(g.sd);
  }
  return p;
}

// --- 1 ---------------------------------------------------------------------
void gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  const ArchitectureKind kinds[] = {ArchitectureKind::Shared, ArchitectureKind::Partial, ArchitectureKind::Independent};
  std::size_t bad_cases = 0, params = 0;
  double worst = 0;
  for (std::size_t c = 0; c < kGradCases; ++c) {
    const auto kind = kinds[c % 3];
    const double dropout = (c / 3) % 2 == 0 ? 0.0 : 0.25;
    auto model = build_default(kind, 3, 1000 + c, dropout);
    model.set_output_prior(rng.uniform(-1, 1), rng.uniform(0.5, 4));
    const auto n = static_cast<std::size_t>(rng.uniform(1, 17));
    Matrix x(n, 3);
    for (double& v : x.values()) v = rng.normal();
    std::vector<double> y(n);
    for (double& v : y) v = rng.normal(0, 2);
    const Rng masks = rng.split(c);
    Rng m = masks;
    const auto g = nll_gradients(model, x, y, &m, {Mode::Train, 1.0});
    const auto res = testing::check_model_gradients(model, g.gradients, [&] {
      Rng mm = masks;
      return nll_loss(model, x, y, Mode::Train, &mm);
    });
    params += res.checked;
    worst = std::max(worst, res.worst_rel);
    if (res.failures > 0 || res.checked != model.parameter_count()) ++bad_cases;
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", bad_cases == 0 && secs < kGradSeconds,
         fmt("%zu cases, %zu parameters, worst rel err %.2e (tol %.0e), %.1f s (limit %.0f s)", kGradCases, params,
             worst, testing::kFdRelTol, secs, kGradSeconds));
}

// --- 2 ---------------------------------------------------------------------
void analytic_nll() {
  const double a = gaussian_nll({{0.0}, {0.0}, {1.0}});
  const double b = gaussian_nll({{1.0}, {0.0}, {1.0}});
  const double ea = 0.5 * std::log(2 * std::numbers::pi), eb = ea + 0.5;
  const bool pass = std::abs(a - ea) < kNllTol && std::abs(b - eb) < kNllTol;
  report(2, "analytic NLL values", pass, fmt("%.9f, %.9f (expected %.9f, %.9f; tol %.0e)", a, b, ea, eb, kNllTol));
}

// --- 3 ---------------------------------------------------------------------
void oracle_calibration() {
  const auto t0 = Clock::now();
  auto spec = SyntheticSpec::defaults();
  spec.seed = 3;
  spec.samples_per_frequency = (kOracleRows + 35) / 36;
  const auto data = generate_synthetic(spec);
  PredictionSet p;
  for (std::size_t i = 0; i < kOracleRows; ++i) {
    p.truth.push_back(data.records[i].path_loss_db);
    p.mean.push_back(data.true_mean[i]);
    p.sd.push_back(data.true_sd[i]);
  }
  const auto iv = intervals(p, 0.95);
  const double cover = picp(p.truth, iv);
  const double width = mpiw(iv);
  const double expected = 2 * z_critical(0.95) * std::accumulate(p.sd.begin(), p.sd.end(), 0.0) / kOracleRows;
  const double secs = seconds_since(t0);
  const bool pass = cover >= kOraclePicpLo && cover <= kOraclePicpHi &&
                    std::abs(width - expected) <= kOracleMpiwRelTol * expected && secs < kOracleSeconds;
  report(3, "oracle calibration", pass,
         fmt("N=%zu PICP %.4f in [%.3f, %.3f]; MPIW %.6f vs 2z*mean(sigma*) %.6f; %.1f s", kOracleRows, cover,
             kOraclePicpLo, kOraclePicpHi, width, expected, secs));
}

// --- 4, 5, 6, 11 share one synthetic experiment ------------------------------
struct Trained {
  Dataset data;
  Fold fold;
  std::optional<HeteroModel> shared;
  std::optional<HomoscedasticMseModel> mse;
  double shared_seconds = 0;
  std::size_t train_rows = 0;
};

Trained train_synthetic() {
  Trained t;
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = kRecoverySamplesPerFrequency;
  t.data = generate_synthetic(spec);
  const auto folds = logo_folds(t.data);
  t.fold = folds.front();
  const TrainConfig cfg;  // batch 1024, lr 0.01, dropout 0.25, <= 100 epochs
  const auto seed = run_seed(cfg.seed, 0, 0);
  t.train_rows = static_cast<std::size_t>(std::llround((1.0 - cfg.val_fraction) * t.fold.train_rows.size()));

  const auto t0 = Clock::now();
  auto shared = train_one(Contender::Shared, t.data, t.fold, cfg, seed);
  t.shared_seconds = seconds_since(t0);
  if (!shared.failed) t.shared = std::get<HeteroModel>(*shared.model);
  auto mse = train_one(Contender::MseBaseline, t.data, t.fold, cfg, seed);
  if (!mse.failed) t.mse = std::get<HomoscedasticMseModel>(*mse.model);
  return t;
}

void heteroscedastic_recovery(const Trained& t) {
  if (!t.shared) {
    report(4, "heteroscedastic recovery", false, "Shared training diverged");
    return;
  }
  const auto p = hetero_predictions(*t.shared, t.data, t.fold.holdout_rows);
  const auto iv = intervals(p, 0.95);
  const double cover = picp(p.truth, iv);
  std::vector<double> true_sd;
  for (std::size_t i : t.fold.holdout_rows) true_sd.push_back(t.data.true_sd[i]);
  const double corr = pearson(p.sd, true_sd);
  const double err = rmse(p);
  const double floor = std::accumulate(true_sd.begin(), true_sd.end(), 0.0) / static_cast<double>(true_sd.size());
  const bool pass = cover >= kRecoveryPicpLo && cover <= kRecoveryPicpHi && corr > kRecoveryCorr &&
                    std::abs(err - floor) <= kRecoveryRmseGap && t.shared_seconds < kRecoverySeconds;
  report(4, "heteroscedastic recovery", pass,
         fmt("holdout %s, %zu train rows: PICP %.4f in [%.2f, %.2f]; corr(sd, sigma*) %.3f > %.1f; RMSE %.3f vs "
             "mean sigma* %.3f (gap <= %.1f); %.0f s",
             t.fold.holdout.c_str(), t.train_rows, cover, kRecoveryPicpLo, kRecoveryPicpHi, corr, kRecoveryCorr, err,
             floor, kRecoveryRmseGap, t.shared_seconds));
}

void homoscedastic_contrast(const Trained& t) {
  if (!t.shared || !t.mse) {
    report(5, "homoscedastic contrast", false, "a model failed to train");
    return;
  }
  const auto pm = to_prediction_set(*t.mse, t.data, t.fold.holdout_rows);
  const auto ivm = intervals(pm, 0.95);
  const double z = ivm.z;
  bool constant = true;
  for (double s : pm.sd) constant = constant && s == t.mse->residual_sd;
  const double expected = 2 * z * t.mse->residual_sd;
  const double width = mpiw(ivm);
  const bool exact = std::abs(width - expected) <= 1e-12 * expected;

  const auto ph = hetero_predictions(*t.shared, t.data, t.fold.holdout_rows);
  std::vector<double> widths;
  for (double s : ph.sd) widths.push_back(2 * z * s);
  const double spread = sd_of(widths);
  report(5, "homoscedastic contrast", constant && exact && spread > kContrastWidthSd,
         fmt("MSE width constant=%s, MPIW %.4f = 2z*%.4f; Shared width SD %.3f dB > %.1f", constant ? "yes" : "no",
             width, t.mse->residual_sd, spread, kContrastWidthSd));
}

void normality(const Trained& t) {
  Rng rng(99);
  std::vector<double> draws(kNormalDraws);
  for (double& v : draws) v = rng.normal();
  const auto ref = sample_moments(draws);
  const bool estimator_ok = std::abs(ref.kurtosis) <= kNormalMomentTol && std::abs(ref.skewness) <= kNormalMomentTol;
  if (!t.shared) {
    report(6, "normality diagnostics", false, "Shared training diverged");
    return;
  }
  const auto m = standardized_moments(hetero_predictions(*t.shared, t.data, t.fold.holdout_rows));
  const bool pass = estimator_ok && std::abs(m.kurtosis) < kMomentLimit && std::abs(m.skewness) < kMomentLimit;
  report(6, "normality diagnostics", pass,
         fmt("residual excess kurtosis %.3f, skewness %.3f (|.| < %.0f); N(0,1) x1e6: %.4f, %.4f (tol %.2f)",
             m.kurtosis, m.skewness, kMomentLimit, ref.kurtosis, ref.skewness, kNormalMomentTol));
}

// --- 7, 8, 9 ---------------------------------------------------------------
void statistical_machinery() {
  const std::vector<double> a{2, 4, 6, 8}, b{1, 2, 3, 4};  // differences {1, 2, 3, 4}
  const auto t = paired_t_test(a, b);
  const double expected = 2.5 / (std::sqrt(5.0 / 3.0) / 2.0);
  const double alpha = bonferroni(0.05, 2);
  report(7, "statistical machinery", std::abs(t.t - expected) < kTTol && alpha == 0.025,
         fmt("t = %.6f (expected %.6f, tol %.0e), p = %.6f; bonferroni(0.05, 2) = %.17g", t.t, expected, kTTol, t.p,
             alpha));
}

void parameter_budgets() {
  const auto s = build_default(ArchitectureKind::Shared, 3, 1).parameter_count();
  const auto p = build_default(ArchitectureKind::Partial, 3, 1).parameter_count();
  const auto i = build_default(ArchitectureKind::Independent, 3, 1).parameter_count();
  report(8, "parameter budgets", s == 4546 && p == 4412 && i == 4592,
         fmt("shared %zu, partial %zu, independent %zu (expected 4546 / 4412 / 4592)", s, p, i));
}

void uma_formula() {
  bool pass = true;
  std::string detail;
  for (const auto& spot : kUmaSpots) {
    const double v = uma_nlos_pathloss(spot.f_ghz, spot.d_m);
    pass = pass && std::abs(v - spot.expected) <= kUmaTol;
    detail += fmt("%.1f GHz/%.0f m: %.4f vs %.4f; ", spot.f_ghz, spot.d_m, v, spot.expected);
  }
  const double slope = uma_nlos_pathloss(3.5, 2000) - uma_nlos_pathloss(3.5, 1000);
  pass = pass && std::abs(slope - kNlosDoublingSlope) <= kSlopeTol;
  report(9, "UMa formula", pass,
         detail + fmt("doubling slope %.4f dB (expected %.4f, tol %.2f)", slope, kNlosDoublingSlope, kSlopeTol));
}

// --- 10 --------------------------------------------------------------------
void mini_end_to_end() {
  const auto t0 = Clock::now();
  auto spec = SyntheticSpec::defaults();
  spec.groups.resize(3);
  spec.samples_per_frequency = 1500;
  spec.seed = 10;
  const auto data = generate_synthetic(spec);
  ExperimentOptions opt;
  opt.train.repeats = 2;
  opt.train.max_epochs = 5;
  const auto res = run_experiment(data, opt);
  const fs::path dir = fs::temp_directory_path() / "heterloss_acceptance_mini";
  fs::remove_all(dir);
  write_experiment(res, dir);

  const auto& rep = res.report;
  bool ok = res.runs.size() == 18 && rep.summaries.size() == 3 && rep.comparisons == 2 &&
            rep.corrected_alpha == 0.025 && rep.tests.size() == 6;
  for (const auto& s : rep.summaries)
    ok = ok && s.runs + s.failed == 6 && std::isfinite(s.rmse.mean) && std::isfinite(s.picp.mean);
  for (const auto& t : rep.tests) ok = ok && (t.result.degenerate || (t.result.p >= 0 && t.result.p <= 1));
  for (const char* f : {"runs.csv", "curves.csv", "curves_summary.csv", "aggregate.csv", "report.json"})
    ok = ok && fs::exists(dir / f);
  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  ok = ok && !j.is_discarded() && j["summaries"].size() == 3 && j["tests"].size() == 6;
  fs::remove_all(dir);
  const double secs = seconds_since(t0);
  report(10, "mini end-to-end run", ok && secs < kMiniSeconds,
         fmt("3 architectures x 3 groups x 2 repeats, %zu rows, <= 5 epochs: %zu runs, %zu tests, %.0f s (limit %.0f)",
             data.size(), res.runs.size(), rep.tests.size(), secs, kMiniSeconds));
}

// --- 11 --------------------------------------------------------------------
void heatmap_property(const Trained& t) {
  if (!t.shared || !t.mse) {
    report(11, "heatmap property", false, "a model failed to train");
    return;
  }
  HeatmapJob job;
  job.surface = read_ascii_grid(fs::path(HETERLOSS_DATA_DIR) / "demo_dsm.asc");
  job.ground = read_ascii_grid(fs::path(HETERLOSS_DATA_DIR) / "demo_dtm.asc");
  job.tx = {static_cast<long>(job.surface.ncols / 2), static_cast<long>(job.surface.nrows / 2)};
  const auto h = render_heatmap(job, PathLossModel{*t.shared});
  double lo = 1e300, hi = -1e300;
  bool buildings_masked = true;
  std::size_t indoor = 0;
  for (std::size_t r = 0; r < job.surface.nrows; ++r) {
    for (std::size_t c = 0; c < job.surface.ncols; ++c) {
      const double w = h.width.at(c, r);
      if (is_indoor(job, {static_cast<long>(c), static_cast<long>(r)})) {
        ++indoor;
        buildings_masked = buildings_masked && h.width.is_nodata(w);
      } else if (!h.width.is_nodata(w)) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      }
    }
  }
  const auto hm = render_heatmap(job, PathLossModel{*t.mse});
  std::optional<double> constant;
  bool bit_constant = true;
  for (double w : hm.width.values) {
    if (hm.width.is_nodata(w)) continue;
    if (!constant) constant = w;
    bit_constant = bit_constant && w == *constant;
  }
  report(11, "heatmap property", hi - lo > kHeatmapRange && buildings_masked && indoor > 0 && bit_constant,
         fmt("Shared width %.2f..%.2f dB (range > %.0f); %zu building pixels all nodata=%s; MSE raster constant=%s "
             "(%.4f dB)",
             lo, hi, kHeatmapRange, indoor, buildings_masked ? "yes" : "no", bit_constant ? "yes" : "no",
             constant.value_or(0.0)));
}

void guarded(int id, const char* name, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("threw: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded(1, "gradient correctness", gradient_correctness);
  guarded(2, "analytic NLL values", analytic_nll);
  guarded(3, "oracle calibration", oracle_calibration);
  Trained trained;
  try {
    trained = train_synthetic();
  } catch (const std::exception& e) {
    std::printf("synthetic training threw: %s\n", e.what());
  }
  guarded(4, "heteroscedastic recovery", [&] { heteroscedastic_recovery(trained); });
  guarded(5, "homoscedastic contrast", [&] { homoscedastic_contrast(trained); });
  guarded(6, "normality diagnostics", [&] { normality(trained); });
  guarded(7, "statistical machinery", statistical_machinery);
  guarded(8, "parameter budgets", parameter_budgets);
  guarded(9, "UMa formula", uma_formula);
  guarded(10, "mini end-to-end run", mini_end_to_end);
  guarded(11, "heatmap property", [&] { heatmap_property(trained); });
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
