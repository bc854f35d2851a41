#pragma once

// Mini-batch epoch loop with validation-based early stopping, shared by the
// heteroscedastic models and the MSE baseline.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "heterloss/rng.hpp"
#include "heterloss/train_config.hpp"

namespace heterloss::detail {

struct RowSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Random train/validation partition of `rows`; at least one row lands on each side.
inline RowSplit split_rows(std::span<const std::size_t> rows, double val_fraction, Rng& rng) {
  std::vector<std::size_t> shuffled(rows.begin(), rows.end());
  std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(shuffled.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, shuffled.size() > 1 ? shuffled.size() - 1 : 1);
  RowSplit s;
  s.validation.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

struct FitTrace {
  std::vector<double> train_loss;  // mean mini-batch loss per epoch
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 1-based
  double best_val = 0.0;
};

/// Runs up to config.max_epochs epochs over `n_train` examples.
/// `step(epoch, batch_positions)` performs one optimiser update and returns the batch loss;
/// `validate()` returns the validation loss. On return `model` holds the weights of
/// the epoch with the lowest validation loss. Throws TrainingDivergence on a non-finite loss.
template <class Model, class Step, class Validate>
FitTrace fit(Model& model, std::size_t n_train, const TrainConfig& config, Rng& shuffle_rng, Step&& step,
             Validate&& validate) {
  FitTrace trace;
  Model best = model;
  double best_val = std::numeric_limits<double>::infinity();
  double reference = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double total = 0.0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t end = std::min(n_train, start + config.batch_size);
      const double loss = step(epoch, std::span<const std::size_t>(order.data() + start, end - start));
      if (!std::isfinite(loss)) {
        trace.train_loss.push_back(loss);
        throw TrainingDivergence("non-finite training loss at epoch " + std::to_string(epoch), trace.train_loss);
      }
      total += loss * static_cast<double>(end - start);
    }
    trace.train_loss.push_back(total / static_cast<double>(n_train));
    const double val = validate();
    trace.val_loss.push_back(val);
    if (!std::isfinite(val)) {
      throw TrainingDivergence("non-finite validation loss at epoch " + std::to_string(epoch), trace.val_loss);
    }
    if (val < best_val) {
      best_val = val;
      best = model;
      trace.best_epoch = epoch;
    }
    if (val < reference - config.min_delta) {
      reference = val;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  trace.best_val = best_val;
  model = std::move(best);
  return trace;
}

}  // namespace heterloss::detail
