#include "heterloss/hetero_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "heterloss/errors.hpp"

namespace heterloss {

std::string to_string(ArchitectureKind k) {
  switch (k) {
    case ArchitectureKind::Shared:
      return "shared";
    case ArchitectureKind::Partial:
      return "partial";
    case ArchitectureKind::Independent:
      return "independent";
  }
  return "unknown";
}

ArchitectureKind architecture_from_string(const std::string& s) {
  if (s == "shared") return ArchitectureKind::Shared;
  if (s == "partial") return ArchitectureKind::Partial;
  if (s == "independent") return ArchitectureKind::Independent;
  throw InputError("unknown architecture '" + s + "'");
}

double clamp_log_variance(double s) { return std::clamp(s, kMinLogVariance, kMaxLogVariance); }

HeteroModel HeteroModel::shared(MlpNetwork net) {
  if (net.output_dim() != 2) throw ShapeError("shared network must have 2 outputs");
  HeteroModel m;
  m.kind_ = ArchitectureKind::Shared;
  m.networks_.push_back(std::move(net));
  return m;
}

HeteroModel HeteroModel::partial(MlpNetwork trunk, MlpNetwork mean_head, MlpNetwork log_variance_head) {
  if (mean_head.input_dim() != trunk.output_dim() || log_variance_head.input_dim() != trunk.output_dim()) {
    throw ShapeError("partial heads must take the trunk output");
  }
  if (mean_head.output_dim() != 1 || log_variance_head.output_dim() != 1) {
    throw ShapeError("partial heads must have 1 output each");
  }
  HeteroModel m;
  m.kind_ = ArchitectureKind::Partial;
  m.networks_ = {std::move(trunk), std::move(mean_head), std::move(log_variance_head)};
  return m;
}

HeteroModel HeteroModel::independent(MlpNetwork mean_net, MlpNetwork log_variance_net) {
  if (mean_net.input_dim() != log_variance_net.input_dim()) throw ShapeError("independent nets need equal inputs");
  if (mean_net.output_dim() != 1 || log_variance_net.output_dim() != 1) {
    throw ShapeError("independent nets must have 1 output each");
  }
  HeteroModel m;
  m.kind_ = ArchitectureKind::Independent;
  m.networks_ = {std::move(mean_net), std::move(log_variance_net)};
  return m;
}

std::size_t HeteroModel::input_dim() const { return networks_.empty() ? 0 : networks_.front().input_dim(); }

std::size_t HeteroModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& net : networks_) n += net.parameter_count();
  return n;
}

void HeteroModel::set_output_prior(double mean, double variance) {
  if (!(variance > 0.0) || !std::isfinite(mean)) throw DomainError("output prior needs finite mean, positive variance");
  const double s = clamp_log_variance(std::log(variance));
  switch (kind_) {
    case ArchitectureKind::Shared: {
      auto& b = networks_[0].layers().back().biases;
      b[0] = mean;
      b[1] = s;
      break;
    }
    case ArchitectureKind::Partial:
      networks_[1].layers().back().biases[0] = mean;
      networks_[2].layers().back().biases[0] = s;
      break;
    case ArchitectureKind::Independent:
      networks_[0].layers().back().biases[0] = mean;
      networks_[1].layers().back().biases[0] = s;
      break;
  }
}

HeteroModel build_default(ArchitectureKind kind, std::size_t input_dim, std::uint64_t seed, double dropout_rate) {
  if (input_dim == 0) throw ConfigError("input_dim must be at least 1");
  const Rng root = Rng(seed).split("init");
  auto make = [&](NetworkSpec spec, std::uint64_t index) {
    Rng rng = root.split(index);
    return init_network(spec, rng);
  };
  switch (kind) {
    case ArchitectureKind::Shared:
      return HeteroModel::shared(make(relu_mlp_spec({input_dim, 64, 64, 2}, dropout_rate), 0));
    case ArchitectureKind::Partial: {
      NetworkSpec trunk{{input_dim, 45}, {Activation::ReLU}, dropout_rate};
      return HeteroModel::partial(make(trunk, 0), make(relu_mlp_spec({45, 45, 1}, dropout_rate), 1),
                                  make(relu_mlp_spec({45, 45, 1}, dropout_rate), 2));
    }
    case ArchitectureKind::Independent:
      return HeteroModel::independent(make(relu_mlp_spec({input_dim, 45, 45, 1}, dropout_rate), 0),
                                      make(relu_mlp_spec({input_dim, 45, 45, 1}, dropout_rate), 1));
  }
  throw ConfigError("unknown architecture");
}

ModelForward forward(const HeteroModel& model, const Matrix& features, Mode mode, Rng* rng) {
  if (model.networks().empty()) throw StateError("model has no networks");
  if (features.cols() != model.input_dim()) throw ShapeError("features do not match model input_dim");
  if (!features.all_finite()) throw InputError("non-finite feature value");

  const auto& nets = model.networks();
  const std::size_t n = features.rows();
  ModelForward out;
  out.mean.resize(n);
  out.log_variance.resize(n);
  switch (model.kind()) {
    case ArchitectureKind::Shared: {
      auto r = heterloss::forward(nets[0], features, mode, rng);
      for (std::size_t i = 0; i < n; ++i) {
        out.mean[i] = r.outputs(i, 0);
        out.log_variance[i] = r.outputs(i, 1);
      }
      out.caches.push_back(std::move(r.cache));
      break;
    }
    case ArchitectureKind::Partial: {
      auto trunk = heterloss::forward(nets[0], features, mode, rng);
      auto mean = heterloss::forward(nets[1], trunk.outputs, mode, rng);
      auto logv = heterloss::forward(nets[2], trunk.outputs, mode, rng);
      for (std::size_t i = 0; i < n; ++i) {
        out.mean[i] = mean.outputs(i, 0);
        out.log_variance[i] = logv.outputs(i, 0);
      }
      out.caches.push_back(std::move(trunk.cache));
      out.caches.push_back(std::move(mean.cache));
      out.caches.push_back(std::move(logv.cache));
      break;
    }
    case ArchitectureKind::Independent: {
      auto mean = heterloss::forward(nets[0], features, mode, rng);
      auto logv = heterloss::forward(nets[1], features, mode, rng);
      for (std::size_t i = 0; i < n; ++i) {
        out.mean[i] = mean.outputs(i, 0);
        out.log_variance[i] = logv.outputs(i, 0);
      }
      out.caches.push_back(std::move(mean.cache));
      out.caches.push_back(std::move(logv.cache));
      break;
    }
  }
  return out;
}

std::vector<GaussianPrediction> predict(const HeteroModel& model, const Matrix& features, Mode mode, Rng* rng) {
  const auto f = forward(model, features, mode, rng);
  std::vector<GaussianPrediction> out(f.mean.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double var = std::exp(clamp_log_variance(f.log_variance[i]));
    out[i] = {f.mean[i], var, std::sqrt(var)};
  }
  return out;
}

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Matrix column(std::span<const double> v) { return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end())); }

}  // namespace

NllResult nll_gradients(const HeteroModel& model, const Matrix& features, std::span<const double> targets, Rng* rng,
                        const NllOptions& options) {
  if (targets.size() != features.rows()) throw ShapeError("nll_gradients: target count != batch rows");
  if (targets.empty()) throw InputError("nll_gradients: empty batch");
  const auto f = forward(model, features, options.mode, rng);
  const std::size_t n = targets.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> d_mean(n);
  std::vector<double> d_logv(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = clamp_log_variance(f.log_variance[i]);
    const double var = std::exp(s);
    const double r = targets[i] - f.mean[i];
    loss += kHalfLog2Pi + 0.5 * s + r * r / (2.0 * var);
    d_mean[i] = (f.mean[i] - targets[i]) / var * inv_n;
    const bool inside = f.log_variance[i] >= kMinLogVariance && f.log_variance[i] <= kMaxLogVariance;
    d_logv[i] = inside ? 0.5 * (1.0 - r * r / var) * inv_n * options.log_variance_grad_scale : 0.0;
  }

  NllResult result;
  result.loss = loss * inv_n;
  const auto& nets = model.networks();
  switch (model.kind()) {
    case ArchitectureKind::Shared: {
      Matrix g(n, 2);
      for (std::size_t i = 0; i < n; ++i) {
        g(i, 0) = d_mean[i];
        g(i, 1) = d_logv[i];
      }
      result.gradients.push_back(backward(nets[0], f.caches[0], g).params);
      break;
    }
    case ArchitectureKind::Partial: {
      auto mean_b = backward(nets[1], f.caches[1], column(d_mean));
      auto logv_b = backward(nets[2], f.caches[2], column(d_logv));
      Matrix trunk_grad = std::move(mean_b.input_grad);
      auto tg = trunk_grad.values();
      auto lg = logv_b.input_grad.values();
      for (std::size_t i = 0; i < tg.size(); ++i) tg[i] += lg[i];
      auto trunk_b = backward(nets[0], f.caches[0], trunk_grad);
      result.gradients.push_back(std::move(trunk_b.params));
      result.gradients.push_back(std::move(mean_b.params));
      result.gradients.push_back(std::move(logv_b.params));
      break;
    }
    case ArchitectureKind::Independent: {
      // Each net sees the other's current output as a constant.
      result.gradients.push_back(backward(nets[0], f.caches[0], column(d_mean)).params);
      result.gradients.push_back(backward(nets[1], f.caches[1], column(d_logv)).params);
      break;
    }
  }
  return result;
}

double nll_loss(const HeteroModel& model, const Matrix& features, std::span<const double> targets, Mode mode,
                Rng* rng) {
  if (targets.size() != features.rows()) throw ShapeError("nll_loss: target count != batch rows");
  if (targets.empty()) throw InputError("nll_loss: empty batch");
  const auto f = forward(model, features, mode, rng);
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double s = clamp_log_variance(f.log_variance[i]);
    const double r = targets[i] - f.mean[i];
    loss += kHalfLog2Pi + 0.5 * s + r * r / (2.0 * std::exp(s));
  }
  return loss / static_cast<double>(targets.size());
}

std::vector<AdamState> make_optimizers(const HeteroModel& model, const AdamConfig& config) {
  std::vector<AdamState> states;
  for (const auto& net : model.networks()) states.push_back(AdamState::for_network(net, config));
  return states;
}

void adam_step(HeteroModel& model, const ModelGradients& grads, std::vector<AdamState>& states) {
  auto& nets = model.networks();
  if (grads.size() != nets.size() || states.size() != nets.size()) throw ShapeError("adam_step: network count mismatch");
  for (std::size_t k = 0; k < nets.size(); ++k) heterloss::adam_step(nets[k], grads[k], states[k]);
}

}  // namespace heterloss
