#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heterloss/baselines.hpp"
#include "heterloss/dataset.hpp"
#include "heterloss/hetero_model.hpp"
#include "heterloss/metrics.hpp"
#include "heterloss/model_io.hpp"
#include "heterloss/train_config.hpp"

namespace heterloss {

/// Anything the harness can evaluate on a fold: the three heteroscedastic
/// architectures and the two homoscedastic baselines.
enum class Contender { Shared, Partial, Independent, MseBaseline, UmaNlos };

std::string to_string(Contender c);
Contender contender_from_string(const std::string& s);
Contender to_contender(ArchitectureKind k);
bool is_heteroscedastic(Contender c);

/// One leave-one-group-out fold.
struct Fold {
  std::string holdout;
  std::vector<std::string> train_groups;
  std::vector<std::size_t> train_rows;    // every row of the training groups
  std::vector<std::size_t> holdout_rows;
};

/// One fold per group, in sorted group order. Needs at least two groups.
std::vector<Fold> logo_folds(const Dataset& data);

struct FoldResult {
  Contender contender = Contender::Shared;
  std::string fold;
  std::size_t run = 0;
  std::string loss_name = "nll";  // "mse" for the MSE baseline, empty for UMa
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  std::size_t best_epoch = 0;  // 1-based, 0 when nothing was trained
  double best_train_loss = 0.0;
  double best_val_loss = 0.0;
  MetricsRow test;
  std::size_t test_size = 0;
  bool failed = false;
  std::string failure;
  std::optional<PathLossModel> model;  // best-validation weights
};

/// Seed for (fold, run), shared by all contenders so their splits pair up.
std::uint64_t run_seed(std::uint64_t experiment_seed, std::size_t fold_index, std::size_t run);

/// Trains `contender` on the fold's training groups (random train/validation
/// split from `seed`) and scores it on the untouched holdout group with the
/// best-validation weights. A diverging run comes back with failed = true.
FoldResult train_one(Contender contender, const Dataset& data, const Fold& fold, const TrainConfig& config,
                     std::uint64_t seed, std::size_t run = 0, const UmaParams& uma = {},
                     RowAccessLog* log = nullptr);

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // population
  double max = 0.0;
  std::size_t count = 0;
};

Aggregate aggregate(std::span<const double> values);

struct ContenderSummary {
  Contender contender = Contender::Shared;
  std::size_t runs = 0;
  std::size_t failed = 0;
  Aggregate train_loss;
  Aggregate val_loss;
  Aggregate rmse;
  Aggregate nll;
  Aggregate picp;
  Aggregate mpiw;
  Aggregate abs_kurtosis;
  Aggregate abs_skewness;
};

struct PairwiseTest {
  std::string metric;
  Contender better = Contender::Shared;  // lower mean RMSE
  Contender worse = Contender::Shared;
  TTestResult result;
  bool significant = false;
};

enum class Pairing { AllRuns, FoldMeans };

struct ComparisonReport {
  std::vector<ContenderSummary> summaries;
  std::vector<PairwiseTest> tests;
  double alpha = 0.05;
  std::size_t comparisons = 0;
  double corrected_alpha = 0.05;
  Pairing pairing = Pairing::AllRuns;
  double confidence = 0.95;
};

struct ExperimentOptions {
  std::vector<Contender> contenders{Contender::Shared, Contender::Partial, Contender::Independent};
  TrainConfig train;
  UmaParams uma;
  std::vector<std::string> holdouts;  // restrict folds; empty = all
  Pairing pairing = Pairing::AllRuns;
  double alpha = 0.05;
  std::size_t workers = 0;  // 0 = OpenMP default
  bool keep_models = true;
};

struct ExperimentResult {
  ComparisonReport report;
  std::vector<FoldResult> runs;  // ordered by (contender, fold, run)
};

/// contenders x folds x repeats runs, then aggregation and paired t-tests
/// between adjacent RMSE-ranked heteroscedastic architectures.
ExperimentResult run_experiment(const Dataset& data, const ExperimentOptions& options);

ComparisonReport summarize(std::span<const FoldResult> runs, std::span<const Contender> contenders, double alpha,
                           Pairing pairing, double confidence);

struct CurveSummary {
  std::vector<double> train_mean;
  std::vector<double> train_sd;
  std::vector<double> val_mean;
  std::vector<double> val_sd;
  /// Runs still training at each epoch; shorter curves are padded with their last value.
  std::vector<std::size_t> active;
};

CurveSummary mean_sd_curves(std::span<const FoldResult> runs);

/// runs.csv, curves.csv, curves_summary.csv, aggregate.csv, report.json and models/.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace heterloss
