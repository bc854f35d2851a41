#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "heterloss/dataset.hpp"
#include "heterloss/metrics.hpp"
#include "heterloss/mlp.hpp"
#include "heterloss/train_config.hpp"

namespace heterloss {

/// Point-prediction network trained on squared error, paired with one
/// constant SD taken from its validation residuals.
struct HomoscedasticMseModel {
  MlpNetwork net;  // [in, 64, 64, 1]
  double residual_sd = 1.0;
  NormStats normalizer;

  friend bool operator==(const HomoscedasticMseModel&, const HomoscedasticMseModel&) = default;
};

struct MseFit {
  HomoscedasticMseModel model;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
};

/// Trains on `train_rows` with early stopping on `val_rows`; residual_sd is the
/// population SD of validation residuals of the retained weights.
/// Throws TrainingDivergence (with the loss trace) when the loss blows up.
MseFit train_mse(const Dataset& data, std::span<const std::size_t> train_rows, std::span<const std::size_t> val_rows,
                 const TrainConfig& config, std::uint64_t seed, RowAccessLog* log = nullptr);

/// Predicted means for already-normalised features.
std::vector<double> predict_mean(const HomoscedasticMseModel& model, const Matrix& features);

/// Urban-macrocell scenario geometry and shadow-fading SDs.
struct UmaParams {
  double base_station_height_m = 25.0;
  double terminal_height_m = 1.5;
  double sd_nlos_db = 6.0;
  double sd_los_db = 4.0;
  /// Treat obstruction-free links (o == 0) as LOS with sd_los_db.
  bool los_from_obstruction = false;

  void validate() const;
};

/// LOS path loss (dB) including the two-slope breakpoint.
double uma_los_pathloss(double frequency_ghz, double distance_2d_m, const UmaParams& params = {});

/// NLOS path loss (dB): max(LOS, 13.54 + 39.08 log10(d3D) + 20 log10(f) - 0.6 (h_UT - 1.5)).
double uma_nlos_pathloss(double frequency_ghz, double distance_2d_m, const UmaParams& params = {});

/// 0.5-100 GHz and 10 m-5 km.
bool uma_in_validity_range(double frequency_ghz, double distance_2d_m);

/// Constant-sd prediction set for the MSE baseline on `rows`.
PredictionSet to_prediction_set(const HomoscedasticMseModel& model, const Dataset& data,
                                std::span<const std::size_t> rows);

/// UMa prediction set on `rows` (distance feature used as 2-D distance).
/// `out_of_range` receives the number of links outside the model's validity range.
PredictionSet to_prediction_set(const UmaParams& params, const Dataset& data, std::span<const std::size_t> rows,
                                std::size_t* out_of_range = nullptr);

}  // namespace heterloss
