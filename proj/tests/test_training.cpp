#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "heterloss/errors.hpp"
#include "heterloss/synthetic.hpp"
#include "heterloss/training.hpp"
#include "json.hpp"
#include "fit_loop.hpp"
#include "text_util.hpp"

using namespace heterloss;
namespace fs = std::filesystem;

namespace {

Dataset small_data(std::size_t groups = 3, std::size_t per_freq = 40) {
  auto spec = SyntheticSpec::defaults();
  spec.groups.resize(groups);
  spec.samples_per_frequency = per_freq;
  spec.seed = 5;
  return generate_synthetic(spec);
}

TrainConfig quick_config(std::size_t epochs = 3) {
  TrainConfig c;
  c.batch_size = 64;
  c.max_epochs = epochs;
  c.patience = TrainConfig::kNoPatience;
  c.repeats = 2;
  return c;
}

FoldResult fake_run(Contender c, std::vector<double> val) {
  FoldResult r;
  r.contender = c;
  r.val_curve = val;
  r.train_curve = val;
  return r;
}

}  // namespace

TEST_CASE("LOGO folds partition the rows") {
  const auto data = small_data(6, 10);
  const auto folds = logo_folds(data);
  REQUIRE(folds.size() == 6);
  std::set<std::string> holdouts;
  for (const auto& f : folds) {
    holdouts.insert(f.holdout);
    CHECK(f.train_groups.size() == 5);
    std::set<std::size_t> all(f.train_rows.begin(), f.train_rows.end());
    for (std::size_t i : f.holdout_rows) CHECK(all.insert(i).second);
    CHECK(all.size() == data.size());
  }
  CHECK(holdouts.size() == 6);

  const auto two = logo_folds(small_data(2, 10));
  REQUIRE(two.size() == 2);
  CHECK(two[0].train_rows == two[1].holdout_rows);
  CHECK(two[1].train_rows == two[0].holdout_rows);

  CHECK_THROWS_AS(logo_folds(small_data(1, 10)), ConfigError);
}

TEST_CASE("split_rows is an 80/20 partition") {
  std::vector<std::size_t> rows(1000);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = 3 * i;
  Rng rng(1);
  const auto s = detail::split_rows(rows, 0.2, rng);
  CHECK(s.validation.size() == 200);
  CHECK(s.train.size() == 800);
  std::vector<std::size_t> merged = s.train;
  merged.insert(merged.end(), s.validation.begin(), s.validation.end());
  std::sort(merged.begin(), merged.end());
  CHECK(merged == rows);
}

TEST_CASE("epoch cap without patience") {
  const auto data = small_data();
  const auto folds = logo_folds(data);
  for (auto c : {Contender::Shared, Contender::MseBaseline}) {
    const auto r = train_one(c, data, folds[0], quick_config(3), 11);
    CHECK(r.train_curve.size() == 3);
    CHECK(r.val_curve.size() == 3);
    CHECK_FALSE(r.failed);
  }
}

TEST_CASE("same seed gives an identical result; different seed does not") {
  const auto data = small_data();
  const auto fold = logo_folds(data)[1];
  for (auto c : {Contender::Shared, Contender::Partial, Contender::Independent, Contender::MseBaseline}) {
    const auto a = train_one(c, data, fold, quick_config(), 21);
    const auto b = train_one(c, data, fold, quick_config(), 21);
    const auto d = train_one(c, data, fold, quick_config(), 22);
    CHECK(a.val_curve == b.val_curve);
    CHECK(a.train_curve == b.train_curve);
    CHECK(a.test.rmse == b.test.rmse);
    CHECK(a.test.picp == b.test.picp);
    CHECK(a.model == b.model);
    CHECK(a.val_curve != d.val_curve);
  }
}

TEST_CASE("holdout rows never reach normalisation, training or validation") {
  const auto data = small_data();
  const auto fold = logo_folds(data)[2];
  const std::set<std::size_t> holdout(fold.holdout_rows.begin(), fold.holdout_rows.end());
  for (auto c : {Contender::Shared, Contender::Partial, Contender::Independent, Contender::MseBaseline}) {
    RowAccessLog log;
    train_one(c, data, fold, quick_config(), 3, 0, {}, &log);
    CHECK_FALSE(log.training.empty());
    CHECK_FALSE(log.validation.empty());
    CHECK(log.normalization == log.training);
    for (const auto* phase : {&log.normalization, &log.training, &log.validation})
      for (std::size_t i : *phase) CHECK(holdout.count(i) == 0);
    std::vector<std::size_t> overlap;
    std::set_intersection(log.training.begin(), log.training.end(), log.validation.begin(), log.validation.end(),
                          std::back_inserter(overlap));
    CHECK(overlap.empty());
    CHECK(log.training.size() + log.validation.size() == fold.train_rows.size());
    CHECK(log.test == fold.holdout_rows);
  }
}

TEST_CASE("reported model is the best-validation model") {
  const auto data = small_data(3, 60);
  const auto fold = logo_folds(data)[0];
  auto cfg = quick_config(12);
  cfg.patience = 3;
  cfg.learning_rate = 0.05;
  const auto r = train_one(Contender::Shared, data, fold, cfg, 8);
  REQUIRE_FALSE(r.failed);
  REQUIRE(r.best_epoch >= 1);
  CHECK(r.best_epoch <= r.val_curve.size());
  CHECK(r.best_val_loss == *std::min_element(r.val_curve.begin(), r.val_curve.end()));
  // The stored model reproduces the best validation loss.
  const auto& model = std::get<HeteroModel>(*r.model);
  Rng split_rng = Rng(8).split("split");
  const auto split = detail::split_rows(fold.train_rows, cfg.val_fraction, split_rng);
  const double v = nll_loss(model, apply(model.normalizer, data, split.validation), data.targets(split.validation));
  CHECK(v == doctest::Approx(r.best_val_loss).epsilon(1e-12));
}

TEST_CASE("training improves the validation NLL on heteroscedastic data") {
  const auto data = small_data(3, 150);
  const auto fold = logo_folds(data)[0];
  auto cfg = quick_config(15);
  cfg.batch_size = 128;
  const auto r = train_one(Contender::Shared, data, fold, cfg, 4);
  CHECK(r.best_val_loss < r.val_curve.front());
}

TEST_CASE("early stopping: patience, min_delta and restore") {
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.patience = 3;
  cfg.min_delta = 0.1;
  const std::vector<double> losses{5.0, 4.0, 3.95, 3.92, 3.5, 3.45, 3.44, 3.43, 3.42, 9.0};
  int model = 0;  // stands in for the weights: the epoch index after each step
  Rng rng(1);
  std::size_t epoch_seen = 0;
  auto step = [&](std::size_t epoch, std::span<const std::size_t>) {
    epoch_seen = epoch;
    model = static_cast<int>(epoch);
    return 1.0;
  };
  auto validate = [&] { return losses.at(epoch_seen - 1); };
  const auto t = detail::fit(model, 10, cfg, rng, step, validate);
  // improvements of at least 0.1 at epochs 2 and 5; epochs 6-8 stale -> stop after 8
  CHECK(t.val_loss.size() == 8);
  // best weights are the global minimum seen (epoch 8), not the last significant improvement
  CHECK(t.best_epoch == 8);
  CHECK(model == 8);
}

TEST_CASE("fit aborts on a non-finite loss") {
  TrainConfig cfg;
  cfg.max_epochs = 5;
  int model = 0;
  Rng rng(1);
  auto step = [&](std::size_t epoch, std::span<const std::size_t>) {
    return epoch == 2 ? std::nan("") : 1.0;
  };
  CHECK_THROWS_AS(detail::fit(model, 10, cfg, rng, step, [] { return 1.0; }), TrainingDivergence);
}

TEST_CASE("mean_sd_curves") {
  const std::vector<FoldResult> one{fake_run(Contender::Shared, {3, 2, 1})};
  auto c = mean_sd_curves(one);
  CHECK(c.val_mean == std::vector<double>{3, 2, 1});
  CHECK(c.val_sd == std::vector<double>{0, 0, 0});

  const std::vector<FoldResult> two{fake_run(Contender::Shared, {3.0, 3.0}), fake_run(Contender::Shared, {4.0, 4.0})};
  c = mean_sd_curves(two);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(c.val_mean[e] == 3.5);
    CHECK(c.val_sd[e] == 0.5);
  }

  const std::vector<FoldResult> ragged{fake_run(Contender::Shared, {3.0}), fake_run(Contender::Shared, {5.0, 4.0})};
  c = mean_sd_curves(ragged);
  CHECK(c.val_mean == std::vector<double>{4.0, 3.5});
  CHECK(c.active == std::vector<std::size_t>{2, 1});

  CHECK_THROWS(mean_sd_curves(std::vector<FoldResult>{}));
}

TEST_CASE("aggregate uses the population SD") {
  const std::vector<double> v{1, 2, 3, 4};
  const auto a = aggregate(v);
  CHECK(a.mean == 2.5);
  CHECK(a.sd == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(a.max == 4);
  CHECK(a.count == 4);
}

TEST_CASE("identical metrics give a degenerate comparison") {
  std::vector<FoldResult> runs;
  for (auto c : {Contender::Shared, Contender::Partial}) {
    for (std::size_t k = 0; k < 4; ++k) {
      FoldResult r;
      r.contender = c;
      r.fold = "g" + std::to_string(k % 2);
      r.run = k / 2;
      r.test.rmse = 5.0 + static_cast<double>(k);
      r.test.picp = 0.9;
      r.test.mpiw = 20.0;
      runs.push_back(r);
    }
  }
  const std::vector<Contender> cs{Contender::Shared, Contender::Partial};
  const auto rep = summarize(runs, cs, 0.05, Pairing::AllRuns, 0.95);
  CHECK(rep.comparisons == 1);
  CHECK(rep.corrected_alpha == 0.05);
  REQUIRE_FALSE(rep.tests.empty());
  for (const auto& t : rep.tests) {
    CHECK(t.result.degenerate);
    CHECK(t.result.t == 0.0);
    CHECK_FALSE(t.significant);
  }
}

TEST_CASE("experiment: counts, report and files") {
  const auto data = small_data(3, 30);
  ExperimentOptions opt;
  opt.contenders = {Contender::Shared, Contender::Partial, Contender::Independent, Contender::MseBaseline,
                    Contender::UmaNlos};
  opt.train = quick_config(2);
  const auto res = run_experiment(data, opt);
  CHECK(res.runs.size() == 5 * 3 * 2 - 3);  // UMa is deterministic: one run per fold
  CHECK(res.report.summaries.size() == 5);
  CHECK(res.report.comparisons == 2);
  CHECK(res.report.corrected_alpha == 0.025);
  for (const auto& s : res.report.summaries) {
    if (s.contender == Contender::UmaNlos) CHECK(s.runs == 3);
    else CHECK(s.runs == 6);
  }
  // ordering by (contender, fold, run)
  for (std::size_t i = 1; i < res.runs.size(); ++i) {
    const auto& a = res.runs[i - 1];
    const auto& b = res.runs[i];
    CHECK(std::tuple(static_cast<int>(a.contender), a.fold, a.run) < std::tuple(static_cast<int>(b.contender), b.fold, b.run));
  }

  const fs::path dir = fs::temp_directory_path() / "heterloss_test_experiment";
  fs::remove_all(dir);
  write_experiment(res, dir);
  for (const char* f : {"runs.csv", "curves.csv", "curves_summary.csv", "aggregate.csv", "report.json"})
    CHECK(fs::exists(dir / f));
  CHECK(std::distance(fs::directory_iterator(dir / "models"), fs::directory_iterator{}) == 4 * 3 * 2);

  // aggregate identity: recompute mean/SD of RMSE from runs.csv
  std::ifstream in(dir / "runs.csv");
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::vector<double>> rmse;
  while (std::getline(in, line)) {
    const auto cells = text::split(line, ',');
    rmse[std::string(cells[0])].push_back(*text::parse_double(cells[3]));
  }
  for (const auto& s : res.report.summaries) {
    const auto& v = rmse[to_string(s.contender)];
    const auto a = aggregate(v);
    CHECK(std::abs(a.mean - s.rmse.mean) <= 1e-12);
    CHECK(std::abs(a.sd - s.rmse.sd) <= 1e-12);
  }

  std::ifstream rj(dir / "report.json");
  const auto j = nlohmann::json::parse(rj);
  CHECK(j["summaries"].size() == 5);
  CHECK(j["corrected_alpha"] == 0.025);
  fs::remove_all(dir);
}

TEST_CASE("experiment results do not depend on the worker count") {
  const auto data = small_data(3, 20);
  ExperimentOptions opt;
  opt.contenders = {Contender::Shared, Contender::MseBaseline};
  opt.train = quick_config(2);
  opt.workers = 1;
  const auto a = run_experiment(data, opt);
  opt.workers = 4;
  const auto b = run_experiment(data, opt);
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].val_curve == b.runs[i].val_curve);
    CHECK(a.runs[i].test.rmse == b.runs[i].test.rmse);
  }
}

TEST_CASE("run seeds are shared across contenders and distinct across runs") {
  CHECK(run_seed(42, 0, 0) == run_seed(42, 0, 0));
  CHECK(run_seed(42, 0, 0) != run_seed(42, 0, 1));
  CHECK(run_seed(42, 0, 0) != run_seed(42, 1, 0));
  CHECK(run_seed(42, 0, 0) != run_seed(43, 0, 0));
}
