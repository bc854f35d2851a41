#include "heterloss/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fit_loop.hpp"
#include "heterloss/adam.hpp"
#include "heterloss/errors.hpp"

namespace heterloss {

MseFit train_mse(const Dataset& data, std::span<const std::size_t> train_rows, std::span<const std::size_t> val_rows,
                 const TrainConfig& config, std::uint64_t seed, RowAccessLog* log) {
  config.validate();
  if (train_rows.empty() || val_rows.empty()) throw InputError("train_mse: empty train or validation split");
  const Rng root(seed);

  HomoscedasticMseModel model;
  model.normalizer = fit_normalizer(data, train_rows);
  if (log) log->normalization.insert(log->normalization.end(), train_rows.begin(), train_rows.end());
  Rng init_rng = root.split("init").split(std::uint64_t{0});
  model.net = init_network(relu_mlp_spec({kFeatureCount, 64, 64, 1}, config.dropout), init_rng);

  const Matrix x_train = apply(model.normalizer, data, train_rows);
  const Matrix x_val = apply(model.normalizer, data, val_rows);
  const auto y_train = data.targets(train_rows);
  const auto y_val = data.targets(val_rows);
  model.net.layers().back().biases[0] =
      std::accumulate(y_train.begin(), y_train.end(), 0.0) / static_cast<double>(y_train.size());

  auto adam = AdamState::for_network(model.net, AdamConfig{config.learning_rate});
  Rng dropout_rng = root.split("dropout");
  Rng shuffle_rng = root.split("shuffle");

  auto step = [&](std::size_t, std::span<const std::size_t> batch) {
    const Matrix xb = x_train.gather_rows(batch);
    if (log)
      for (std::size_t pos : batch) log->training.push_back(train_rows[pos]);
    auto fwd = forward(model.net, xb, Mode::Train, &dropout_rng);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    Matrix grad(batch.size(), 1);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double r = fwd.outputs(i, 0) - y_train[batch[i]];
      loss += r * r;
      grad(i, 0) = 2.0 * r * inv_n;
    }
    const auto back = backward(model.net, fwd.cache, grad);
    adam_step(model.net, back.params, adam);
    return loss * inv_n;
  };
  auto validate = [&] {
    if (log) log->validation.insert(log->validation.end(), val_rows.begin(), val_rows.end());
    const Matrix out = infer(model.net, x_val);
    double ss = 0.0;
    for (std::size_t i = 0; i < y_val.size(); ++i) {
      const double r = out(i, 0) - y_val[i];
      ss += r * r;
    }
    return ss / static_cast<double>(y_val.size());
  };
  auto trace = detail::fit(model, train_rows.size(), config, shuffle_rng, step, validate);

  const Matrix out = infer(model.net, x_val);
  double mean = 0.0;
  for (std::size_t i = 0; i < y_val.size(); ++i) mean += y_val[i] - out(i, 0);
  mean /= static_cast<double>(y_val.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < y_val.size(); ++i) {
    const double d = y_val[i] - out(i, 0) - mean;
    ss += d * d;
  }
  // A perfect fit still needs a positive SD for interval construction.
  model.residual_sd = std::max(std::sqrt(ss / static_cast<double>(y_val.size())), 1e-6);

  MseFit fit;
  fit.model = std::move(model);
  fit.train_loss = std::move(trace.train_loss);
  fit.val_loss = std::move(trace.val_loss);
  fit.best_epoch = trace.best_epoch;
  return fit;
}

std::vector<double> predict_mean(const HomoscedasticMseModel& model, const Matrix& features) {
  const Matrix out = infer(model.net, features);
  std::vector<double> mean(out.rows());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = out(i, 0);
  return mean;
}

void UmaParams::validate() const {
  if (!(base_station_height_m > 0.0) || !(terminal_height_m > 0.0)) throw DomainError("UMa heights must be positive");
  if (!(sd_nlos_db > 0.0) || !(sd_los_db > 0.0)) throw DomainError("UMa SDs must be positive");
  // the breakpoint distance needs both antennas above the 1 m effective environment height
  if (!(terminal_height_m > 1.0) || !(base_station_height_m > terminal_height_m)) {
    throw DomainError("UMa needs 1 m < terminal height < base station height");
  }
}

namespace {

constexpr double kSpeedOfLight = 3.0e8;
constexpr double kEffectiveEnvironmentHeight = 1.0;

double distance_3d(double d2d, const UmaParams& p) {
  const double dh = p.base_station_height_m - p.terminal_height_m;
  return std::sqrt(d2d * d2d + dh * dh);
}

void check_inputs(double f, double d, const UmaParams& p) {
  if (!(f > 0.0)) throw DomainError("UMa frequency must be positive");
  if (!(d > 0.0)) throw DomainError("UMa distance must be positive");
  p.validate();
}

}  // namespace

bool uma_in_validity_range(double frequency_ghz, double distance_2d_m) {
  return frequency_ghz >= 0.5 && frequency_ghz <= 100.0 && distance_2d_m >= 10.0 && distance_2d_m <= 5000.0;
}

double uma_los_pathloss(double frequency_ghz, double distance_2d_m, const UmaParams& params) {
  check_inputs(frequency_ghz, distance_2d_m, params);
  const double h_bs = params.base_station_height_m;
  const double h_ut = params.terminal_height_m;
  const double breakpoint = 4.0 * (h_bs - kEffectiveEnvironmentHeight) * (h_ut - kEffectiveEnvironmentHeight) *
                            frequency_ghz * 1e9 / kSpeedOfLight;
  const double d3d = distance_3d(distance_2d_m, params);
  if (distance_2d_m <= breakpoint) return 28.0 + 22.0 * std::log10(d3d) + 20.0 * std::log10(frequency_ghz);
  const double dh = h_bs - h_ut;
  return 28.0 + 40.0 * std::log10(d3d) + 20.0 * std::log10(frequency_ghz) -
         9.0 * std::log10(breakpoint * breakpoint + dh * dh);
}

double uma_nlos_pathloss(double frequency_ghz, double distance_2d_m, const UmaParams& params) {
  const double los = uma_los_pathloss(frequency_ghz, distance_2d_m, params);
  const double d3d = distance_3d(distance_2d_m, params);
  const double nlos = 13.54 + 39.08 * std::log10(d3d) + 20.0 * std::log10(frequency_ghz) -
                      0.6 * (params.terminal_height_m - 1.5);
  return std::max(los, nlos);
}

PredictionSet to_prediction_set(const HomoscedasticMseModel& model, const Dataset& data,
                                std::span<const std::size_t> rows) {
  if (rows.empty()) throw InputError("to_prediction_set: no rows");
  PredictionSet p;
  p.truth = data.targets(rows);
  p.mean = predict_mean(model, apply(model.normalizer, data, rows));
  p.sd.assign(rows.size(), model.residual_sd);
  return p;
}

PredictionSet to_prediction_set(const UmaParams& params, const Dataset& data, std::span<const std::size_t> rows,
                                std::size_t* out_of_range) {
  if (rows.empty()) throw InputError("to_prediction_set: no rows");
  params.validate();
  PredictionSet p;
  p.truth = data.targets(rows);
  p.mean.reserve(rows.size());
  p.sd.reserve(rows.size());
  std::size_t outside = 0;
  for (std::size_t i : rows) {
    const auto& r = data.records.at(i);
    const double f_ghz = r.frequency_mhz * 1e-3;
    if (!uma_in_validity_range(f_ghz, r.distance_m)) ++outside;
    const bool los = params.los_from_obstruction && r.obstruction_m == 0.0;
    p.mean.push_back(los ? uma_los_pathloss(f_ghz, r.distance_m, params)
                         : uma_nlos_pathloss(f_ghz, r.distance_m, params));
    p.sd.push_back(los ? params.sd_los_db : params.sd_nlos_db);
  }
  if (out_of_range) *out_of_range = outside;
  return p;
}

}  // namespace heterloss
