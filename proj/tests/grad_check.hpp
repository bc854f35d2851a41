#pragma once

// Central finite-difference checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "heterloss/hetero_model.hpp"

namespace heterloss::testing {

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;
  std::string worst_where;
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;
inline constexpr double kFdAbsFloor = 1e-7;

inline void compare(GradCheck& out, double analytic, double numeric, const std::string& where) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kFdAbsFloor / kFdRelTol});
  const double rel = std::abs(analytic - numeric) / scale;
  ++out.checked;
  if (rel > kFdRelTol) ++out.failures;
  if (rel > out.worst_rel) {
    out.worst_rel = rel;
    out.worst_where = where;
  }
}

// `loss()` must be deterministic (fixed dropout masks, fixed batch).
inline GradCheck check_model_gradients(HeteroModel& model, const ModelGradients& grads,
                                       const std::function<double()>& loss) {
  GradCheck out;
  auto& nets = model.networks();
  for (std::size_t n = 0; n < nets.size(); ++n) {
    auto& layers = nets[n].layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto probe = [&](double& p, double analytic, const std::string& tag) {
        const double saved = p;
        p = saved + kFdStep;
        const double up = loss();
        p = saved - kFdStep;
        const double down = loss();
        p = saved;
        compare(out, analytic, (up - down) / (2 * kFdStep),
                "net " + std::to_string(n) + " layer " + std::to_string(l) + " " + tag);
      };
      auto w = layers[l].weights.values();
      const auto gw = grads[n].weights[l].values();
      for (std::size_t i = 0; i < w.size(); ++i) probe(w[i], gw[i], "w" + std::to_string(i));
      auto& b = layers[l].biases;
      for (std::size_t i = 0; i < b.size(); ++i) probe(b[i], grads[n].biases[l][i], "b" + std::to_string(i));
    }
  }
  return out;
}

}  // namespace heterloss::testing
