#pragma once

#include <cstdint>

#include "heterloss/mlp.hpp"

namespace heterloss {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one network.
struct AdamState {
  AdamConfig config;
  NetworkGradients first_moment;
  NetworkGradients second_moment;
  std::uint64_t step_count = 0;

  static AdamState for_network(const MlpNetwork& net, AdamConfig config = {});
};

/// One bias-corrected Adam update of every weight and bias in `net`.
void adam_step(MlpNetwork& net, const NetworkGradients& grads, AdamState& state);

}  // namespace heterloss
