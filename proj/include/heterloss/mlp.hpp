#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "heterloss/matrix.hpp"
#include "heterloss/rng.hpp"

namespace heterloss {

enum class Activation { ReLU, Identity };
enum class Mode { Train, Infer };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Fully connected layer: out = act(W x + b), optionally followed by inverted
/// dropout in Train mode.
struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> biases;
  Activation activation = Activation::Identity;
  double dropout_rate = 0.0;

  [[nodiscard]] std::size_t in_dim() const { return weights.cols(); }
  [[nodiscard]] std::size_t out_dim() const { return weights.rows(); }
  [[nodiscard]] std::size_t parameter_count() const { return weights.size() + biases.size(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class MlpNetwork {
 public:
  MlpNetwork() = default;
  /// Validates that layer dimensions chain and dropout rates are in [0, 1).
  explicit MlpNetwork(std::vector<DenseLayer> layers);

  [[nodiscard]] std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  [[nodiscard]] std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::size_t depth() const { return layers_.size(); }

  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Layer sizes [input, hidden..., output].
  [[nodiscard]] std::vector<std::size_t> layer_sizes() const;

  friend bool operator==(const MlpNetwork&, const MlpNetwork&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Everything backward() needs from a forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;          // input fed to each layer
  std::vector<Matrix> pre_activations; // W x + b of each layer
  std::vector<Matrix> dropout_scale;   // per-layer mask (0 or 1/(1-p)); empty when unused
  std::vector<std::size_t> layer_sizes;
};

/// d(loss)/d(parameter) for every layer, same shapes as the network.
struct NetworkGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static NetworkGradients zeros_like(const MlpNetwork& net);
  void scale(double factor);
  void add(const NetworkGradients& other);
  [[nodiscard]] std::size_t parameter_count() const;
};

struct BackwardResult {
  NetworkGradients params;
  Matrix input_grad;  // d(loss)/d(input batch)
};

struct ForwardResult {
  Matrix outputs;
  ForwardCache cache;
};

/// Forward pass. Train mode needs `rng` for dropout masks; Infer mode ignores it.
ForwardResult forward(const MlpNetwork& net, const Matrix& batch, Mode mode, Rng* rng = nullptr);

/// Infer-mode forward without keeping a cache.
Matrix infer(const MlpNetwork& net, const Matrix& batch);

BackwardResult backward(const MlpNetwork& net, const ForwardCache& cache, const Matrix& output_grad);

struct NetworkSpec {
  std::vector<std::size_t> sizes;       // [input, hidden..., output]
  std::vector<Activation> activations;  // one per layer (sizes.size() - 1)
  double dropout_rate = 0.0;            // applied after every ReLU layer
};

/// He-uniform weights for ReLU layers, Glorot-uniform for Identity layers, zero biases.
MlpNetwork init_network(const NetworkSpec& spec, Rng& rng);
MlpNetwork init_network(const NetworkSpec& spec, std::uint64_t seed);

/// ReLU hidden layers and an Identity output layer.
NetworkSpec relu_mlp_spec(std::vector<std::size_t> sizes, double dropout_rate);

}  // namespace heterloss
