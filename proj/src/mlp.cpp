#include "heterloss/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "heterloss/errors.hpp"
#include "heterloss/kernels.hpp"

namespace heterloss {

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "identity") return Activation::Identity;
  throw InputError("unknown activation '" + s + "'");
}

MlpNetwork::MlpNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.biases.size() != layer.out_dim()) throw ShapeError("layer " + std::to_string(l) + ": bias size mismatch");
    if (layer.in_dim() == 0 || layer.out_dim() == 0) throw ConfigError("layer " + std::to_string(l) + " is empty");
    if (!(layer.dropout_rate >= 0.0 && layer.dropout_rate < 1.0)) {
      throw ConfigError("layer " + std::to_string(l) + ": dropout rate must be in [0, 1)");
    }
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim()) {
      throw ShapeError("layer " + std::to_string(l) + " input does not match previous output");
    }
  }
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

std::vector<std::size_t> MlpNetwork::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(input_dim());
  for (const auto& l : layers_) sizes.push_back(l.out_dim());
  return sizes;
}

NetworkGradients NetworkGradients::zeros_like(const MlpNetwork& net) {
  NetworkGradients g;
  for (const auto& l : net.layers()) {
    g.weights.emplace_back(l.out_dim(), l.in_dim());
    g.biases.emplace_back(l.out_dim(), 0.0);
  }
  return g;
}

void NetworkGradients::scale(double factor) {
  for (auto& w : weights)
    for (double& v : w.values()) v *= factor;
  for (auto& b : biases)
    for (double& v : b) v *= factor;
}

void NetworkGradients::add(const NetworkGradients& other) {
  if (other.weights.size() != weights.size()) throw ShapeError("gradient add: layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].size() != other.weights[l].size()) throw ShapeError("gradient add: shape mismatch");
    auto dst = weights[l].values();
    auto src = other.weights[l].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
  }
}

std::size_t NetworkGradients::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

ForwardResult forward(const MlpNetwork& net, const Matrix& batch, Mode mode, Rng* rng) {
  if (net.depth() == 0) throw StateError("forward on an empty network");
  if (batch.cols() != net.input_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  }
  if (!batch.all_finite()) throw InputError("forward: non-finite input");
  if (mode == Mode::Train && rng == nullptr) {
    for (const auto& l : net.layers())
      if (l.dropout_rate > 0.0) throw StateError("forward: Train mode with dropout needs an rng");
  }

  ForwardResult result;
  auto& cache = result.cache;
  cache.layer_sizes = net.layer_sizes();
  cache.inputs.reserve(net.depth());
  cache.pre_activations.reserve(net.depth());
  cache.dropout_scale.resize(net.depth());

  Matrix current = batch;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto& layer = net.layers()[l];
    Matrix z;
    kernels::affine_forward(current, layer.weights, layer.biases, z);
    Matrix a = z;
    if (layer.activation == Activation::ReLU) {
      for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
    }
    if (mode == Mode::Train && layer.dropout_rate > 0.0) {
      const double keep = 1.0 - layer.dropout_rate;
      Matrix mask(a.rows(), a.cols());
      auto m = mask.values();
      auto av = a.values();
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        av[i] *= m[i];
      }
      cache.dropout_scale[l] = std::move(mask);
    }
    cache.inputs.push_back(std::move(current));
    cache.pre_activations.push_back(std::move(z));
    current = std::move(a);
  }
  result.outputs = std::move(current);
  return result;
}

Matrix infer(const MlpNetwork& net, const Matrix& batch) { return forward(net, batch, Mode::Infer).outputs; }

BackwardResult backward(const MlpNetwork& net, const ForwardCache& cache, const Matrix& output_grad) {
  if (cache.layer_sizes != net.layer_sizes() || cache.inputs.size() != net.depth()) {
    throw StateError("backward: cache was produced by a different network");
  }
  const std::size_t batch = cache.inputs.front().rows();
  if (output_grad.rows() != batch || output_grad.cols() != net.output_dim()) {
    throw ShapeError("backward: output gradient shape does not match outputs");
  }

  BackwardResult result;
  result.params = NetworkGradients::zeros_like(net);
  Matrix grad = output_grad;
  for (std::size_t li = net.depth(); li-- > 0;) {
    const auto& layer = net.layers()[li];
    if (!cache.dropout_scale[li].empty()) {
      auto g = grad.values();
      auto m = cache.dropout_scale[li].values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
    }
    if (layer.activation == Activation::ReLU) {
      auto g = grad.values();
      auto z = cache.pre_activations[li].values();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (z[i] <= 0.0) g[i] = 0.0;
    }
    kernels::affine_backward_params(grad, cache.inputs[li], result.params.weights[li], result.params.biases[li]);
    Matrix next;
    kernels::affine_backward_input(grad, layer.weights, next);
    grad = std::move(next);
  }
  result.input_grad = std::move(grad);
  return result;
}

NetworkSpec relu_mlp_spec(std::vector<std::size_t> sizes, double dropout_rate) {
  NetworkSpec spec;
  spec.sizes = std::move(sizes);
  if (spec.sizes.size() >= 2) {
    spec.activations.assign(spec.sizes.size() - 1, Activation::ReLU);
    spec.activations.back() = Activation::Identity;
  }
  spec.dropout_rate = dropout_rate;
  return spec;
}

MlpNetwork init_network(const NetworkSpec& spec, Rng& rng) {
  if (spec.sizes.size() < 2) throw ConfigError("network spec needs at least input and output sizes");
  if (spec.activations.size() != spec.sizes.size() - 1) {
    throw ConfigError("network spec needs one activation per layer");
  }
  for (std::size_t s : spec.sizes)
    if (s == 0) throw ConfigError("layer sizes must be positive");
  if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
    const std::size_t in = spec.sizes[l];
    const std::size_t out = spec.sizes[l + 1];
    DenseLayer layer;
    layer.activation = spec.activations[l];
    layer.dropout_rate = layer.activation == Activation::ReLU ? spec.dropout_rate : 0.0;
    const double bound = layer.activation == Activation::ReLU
                             ? std::sqrt(6.0 / static_cast<double>(in))
                             : std::sqrt(6.0 / static_cast<double>(in + out));
    layer.weights = Matrix(out, in);
    for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
    layer.biases.assign(out, 0.0);
    layers.push_back(std::move(layer));
  }
  return MlpNetwork(std::move(layers));
}

MlpNetwork init_network(const NetworkSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return init_network(spec, rng);
}

}  // namespace heterloss
