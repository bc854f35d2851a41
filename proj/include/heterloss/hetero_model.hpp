#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heterloss/adam.hpp"
#include "heterloss/dataset.hpp"
#include "heterloss/mlp.hpp"

namespace heterloss {

/// How the mean and log-variance outputs share parameters.
///   Shared      one network emits [mean, log-variance]
///   Partial     a common trunk feeds two separate heads
///   Independent two disjoint networks
enum class ArchitectureKind { Shared, Partial, Independent };

std::string to_string(ArchitectureKind k);
ArchitectureKind architecture_from_string(const std::string& s);

struct GaussianPrediction {
  double mean = 0.0;      // dB
  double variance = 1.0;  // dB^2
  double sd = 1.0;        // dB
};

/// The log-variance output is clamped to this range before exponentiation.
inline constexpr double kMinLogVariance = -10.0;
inline constexpr double kMaxLogVariance = 10.0;

double clamp_log_variance(double s);

class HeteroModel {
 public:
  HeteroModel() = default;

  /// `net` must have two outputs: mean then log-variance.
  static HeteroModel shared(MlpNetwork net);
  /// Heads take the trunk output and emit one value each.
  static HeteroModel partial(MlpNetwork trunk, MlpNetwork mean_head, MlpNetwork log_variance_head);
  static HeteroModel independent(MlpNetwork mean_net, MlpNetwork log_variance_net);

  [[nodiscard]] ArchitectureKind kind() const { return kind_; }
  [[nodiscard]] std::size_t input_dim() const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Shared: {net}; Partial: {trunk, mean head, log-variance head}; Independent: {mean net, log-variance net}.
  [[nodiscard]] const std::vector<MlpNetwork>& networks() const { return networks_; }
  std::vector<MlpNetwork>& networks() { return networks_; }

  /// Sets the output biases so an untrained model predicts N(mean, variance).
  void set_output_prior(double mean, double variance);

  /// Feature normaliser the model was trained with; empty for bare models.
  NormStats normalizer;

  friend bool operator==(const HeteroModel&, const HeteroModel&) = default;

 private:
  ArchitectureKind kind_ = ArchitectureKind::Shared;
  std::vector<MlpNetwork> networks_;
};

/// Default configurations, sized to roughly 4,500 parameters each:
/// Shared [in,64,64,2]; Partial trunk [in,45] with heads [45,45,1];
/// Independent two [in,45,45,1] networks.
HeteroModel build_default(ArchitectureKind kind, std::size_t input_dim, std::uint64_t seed,
                          double dropout_rate = 0.25);

/// Raw outputs and what backward needs.
struct ModelForward {
  std::vector<double> mean;
  std::vector<double> log_variance;  // unclamped network output s
  std::vector<ForwardCache> caches;  // one per network
};

ModelForward forward(const HeteroModel& model, const Matrix& features, Mode mode, Rng* rng = nullptr);

/// Gaussian predictions for already-normalised features.
std::vector<GaussianPrediction> predict(const HeteroModel& model, const Matrix& features, Mode mode = Mode::Infer,
                                        Rng* rng = nullptr);

using ModelGradients = std::vector<NetworkGradients>;

struct NllOptions {
  Mode mode = Mode::Train;
  /// Multiplies d(loss)/d(log-variance) before it is propagated (warm-up damping).
  double log_variance_grad_scale = 1.0;
};

struct NllResult {
  double loss = 0.0;
  ModelGradients gradients;
};

/// Mean Gaussian negative log-likelihood of `targets` and its gradient with
/// respect to every parameter of the model.
NllResult nll_gradients(const HeteroModel& model, const Matrix& features, std::span<const double> targets, Rng* rng,
                        const NllOptions& options = {});

/// Batch loss only (Infer mode unless told otherwise).
double nll_loss(const HeteroModel& model, const Matrix& features, std::span<const double> targets,
                Mode mode = Mode::Infer, Rng* rng = nullptr);

std::vector<AdamState> make_optimizers(const HeteroModel& model, const AdamConfig& config = {});
void adam_step(HeteroModel& model, const ModelGradients& grads, std::vector<AdamState>& states);

}  // namespace heterloss
