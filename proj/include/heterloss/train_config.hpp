#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "heterloss/errors.hpp"

namespace heterloss {

/// Optimisation and protocol settings shared by every trained model.
struct TrainConfig {
  std::size_t batch_size = 1024;
  double learning_rate = 0.01;
  double dropout = 0.25;
  std::size_t max_epochs = 100;
  /// Epochs without a min_delta improvement in validation loss before stopping.
  std::size_t patience = 10;
  double min_delta = 0.001;
  std::size_t repeats = 10;
  double val_fraction = 0.2;
  double confidence = 0.95;
  /// For the first `warmup_epochs` epochs the log-variance gradient is scaled by `warmup_scale`.
  std::size_t warmup_epochs = 5;
  double warmup_scale = 0.1;
  std::uint64_t seed = 42;

  static constexpr std::size_t kNoPatience = std::numeric_limits<std::size_t>::max();

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
    if (patience == 0) throw ConfigError("patience must be at least 1");
    if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be non-negative");
    if (repeats == 0) throw ConfigError("repeats must be at least 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
    if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must be in (0, 1)");
    if (!(warmup_scale >= 0.0)) throw ConfigError("warmup_scale must be non-negative");
  }
};

/// A run whose loss became non-finite.
/// Dataset rows read by each phase of a run; filled when a log is passed to the trainers.
/// Lists are sorted and de-duplicated once the run finishes.
struct RowAccessLog {
  std::vector<std::size_t> normalization;
  std::vector<std::size_t> training;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  void finalize() {
    for (auto* v : {&normalization, &training, &validation, &test}) {
      std::sort(v->begin(), v->end());
      v->erase(std::unique(v->begin(), v->end()), v->end());
    }
  }
};

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& what, std::vector<double> trace)
      : Error(what), loss_trace(std::move(trace)) {}
  std::vector<double> loss_trace;
};

}  // namespace heterloss
