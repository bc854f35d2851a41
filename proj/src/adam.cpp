#include "heterloss/adam.hpp"

#include <cmath>

#include "heterloss/errors.hpp"

namespace heterloss {

AdamState AdamState::for_network(const MlpNetwork& net, AdamConfig config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (!(config.beta1 > 0.0 && config.beta1 < 1.0 && config.beta2 > 0.0 && config.beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in (0, 1)");
  }
  if (!(config.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  AdamState s;
  s.config = config;
  s.first_moment = NetworkGradients::zeros_like(net);
  s.second_moment = NetworkGradients::zeros_like(net);
  return s;
}

namespace {

void update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
            const AdamConfig& c, double correction1, double correction2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

void adam_step(MlpNetwork& net, const NetworkGradients& grads, AdamState& state) {
  auto& layers = net.layers();
  if (grads.weights.size() != layers.size() || state.first_moment.weights.size() != layers.size() ||
      state.second_moment.weights.size() != layers.size()) {
    throw ShapeError("adam_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t nw = layers[l].weights.size();
    const std::size_t nb = layers[l].biases.size();
    if (grads.weights[l].size() != nw || grads.biases[l].size() != nb || state.first_moment.weights[l].size() != nw ||
        state.second_moment.biases[l].size() != nb) {
      throw ShapeError("adam_step: shape mismatch at layer " + std::to_string(l));
    }
  }

  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.config.beta1, t);
  const double c2 = 1.0 - std::pow(state.config.beta2, t);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights.values(), grads.weights[l].values(), state.first_moment.weights[l].values(),
           state.second_moment.weights[l].values(), state.config, c1, c2);
    update(layers[l].biases, grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l],
           state.config, c1, c2);
  }
}

}  // namespace heterloss
