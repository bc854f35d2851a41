#include "heterloss/model_io.hpp"

#include <fstream>
#include <sstream>

#include "heterloss/errors.hpp"
#include "json.hpp"

namespace heterloss {

using nlohmann::json;

namespace {

json network_to_json(const MlpNetwork& net, const std::string& role) {
  json j;
  j["role"] = role;
  j["spec"] = net.layer_sizes();
  json acts = json::array();
  json layers = json::array();
  double dropout = 0.0;
  for (const auto& l : net.layers()) {
    acts.push_back(to_string(l.activation));
    dropout = std::max(dropout, l.dropout_rate);
    json lj;
    lj["weights"] = std::vector<double>(l.weights.values().begin(), l.weights.values().end());
    lj["biases"] = l.biases;
    lj["dropout_rate"] = l.dropout_rate;
    layers.push_back(std::move(lj));
  }
  j["activations"] = std::move(acts);
  j["dropout_rate"] = dropout;
  j["layers"] = std::move(layers);
  return j;
}

MlpNetwork network_from_json(const json& j) {
  const auto spec = j.at("spec").get<std::vector<std::size_t>>();
  const auto acts = j.at("activations").get<std::vector<std::string>>();
  const auto& layers_j = j.at("layers");
  if (spec.size() < 2 || acts.size() != spec.size() - 1 || layers_j.size() != spec.size() - 1) {
    throw InputError("network block: spec, activations and layers disagree");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < spec.size(); ++l) {
    const auto& lj = layers_j.at(l);
    DenseLayer layer;
    layer.activation = activation_from_string(acts[l]);
    layer.dropout_rate = lj.value("dropout_rate", 0.0);
    layer.weights = Matrix(spec[l + 1], spec[l], lj.at("weights").get<std::vector<double>>());
    layer.biases = lj.at("biases").get<std::vector<double>>();
    layers.push_back(std::move(layer));
  }
  return MlpNetwork(std::move(layers));
}

json norm_to_json(const NormStats& s) {
  json arr = json::array();
  for (const auto& f : s.features) {
    arr.push_back({{"name", f.name}, {"transform", to_string(f.transform)}, {"mean", f.mean}, {"sd", f.sd}});
  }
  return arr;
}

NormStats norm_from_json(const json& j) {
  NormStats s;
  for (const auto& f : j) {
    s.features.push_back({f.at("name").get<std::string>(),
                          feature_transform_from_string(f.at("transform").get<std::string>()),
                          f.at("mean").get<double>(), f.at("sd").get<double>()});
  }
  return s;
}

const char* const kSharedRoles[] = {"shared"};
const char* const kPartialRoles[] = {"trunk", "mean_head", "log_variance_head"};
const char* const kIndependentRoles[] = {"mean", "log_variance"};

}  // namespace

std::string architecture_tag(const PathLossModel& model) {
  if (const auto* h = std::get_if<HeteroModel>(&model)) return to_string(h->kind());
  return "mse";
}

std::string serialize_model(const PathLossModel& model) {
  json j;
  j["version"] = kModelFormatVersion;
  j["architecture"] = architecture_tag(model);
  json nets = json::array();
  if (const auto* h = std::get_if<HeteroModel>(&model)) {
    j["input_dim"] = h->input_dim();
    j["normalization"] = norm_to_json(h->normalizer);
    for (std::size_t k = 0; k < h->networks().size(); ++k) {
      const char* role = h->kind() == ArchitectureKind::Shared    ? kSharedRoles[k]
                         : h->kind() == ArchitectureKind::Partial ? kPartialRoles[k]
                                                                  : kIndependentRoles[k];
      nets.push_back(network_to_json(h->networks()[k], role));
    }
  } else {
    const auto& m = std::get<HomoscedasticMseModel>(model);
    j["input_dim"] = m.net.input_dim();
    j["normalization"] = norm_to_json(m.normalizer);
    nets.push_back(network_to_json(m.net, "mean"));
    j["residual_sd"] = m.residual_sd;
  }
  j["networks"] = std::move(nets);
  return j.dump(1);
}

PathLossModel deserialize_model(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("version").get<std::string>() != kModelFormatVersion) {
      throw InputError("unsupported model version '" + j.at("version").get<std::string>() + "'");
    }
    const auto arch = j.at("architecture").get<std::string>();
    const NormStats norm = norm_from_json(j.at("normalization"));
    std::vector<MlpNetwork> nets;
    for (const auto& nj : j.at("networks")) nets.push_back(network_from_json(nj));

    auto need = [&](std::size_t n) {
      if (nets.size() != n) throw InputError("architecture '" + arch + "' needs " + std::to_string(n) + " networks");
    };
    if (norm.dim() != kFeatureCount) {
      throw InputError("normalization has " + std::to_string(norm.dim()) + " features, expected " +
                       std::to_string(kFeatureCount));
    }
    if (nets.empty() || nets[0].input_dim() != norm.dim()) {
      throw InputError("first network input size does not match the normalization");
    }
    if (arch == "mse") {
      need(1);
      HomoscedasticMseModel m;
      m.net = std::move(nets[0]);
      m.residual_sd = j.at("residual_sd").get<double>();
      m.normalizer = norm;
      if (!(m.residual_sd > 0.0)) throw InputError("residual_sd must be positive");
      return m;
    }
    HeteroModel model;
    switch (architecture_from_string(arch)) {
      case ArchitectureKind::Shared:
        need(1);
        model = HeteroModel::shared(std::move(nets[0]));
        break;
      case ArchitectureKind::Partial:
        need(3);
        model = HeteroModel::partial(std::move(nets[0]), std::move(nets[1]), std::move(nets[2]));
        break;
      case ArchitectureKind::Independent:
        need(2);
        model = HeteroModel::independent(std::move(nets[0]), std::move(nets[1]));
        break;
    }
    model.normalizer = norm;
    return model;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  } catch (const ShapeError& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const PathLossModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << serialize_model(model) << '\n';
}

PathLossModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

std::vector<GaussianPrediction> predict_links(const PathLossModel& model, const Matrix& raw_features) {
  if (const auto* h = std::get_if<HeteroModel>(&model)) {
    if (h->normalizer.dim() != raw_features.cols()) throw ShapeError("model normaliser does not match features");
    return predict(*h, apply(h->normalizer, raw_features));
  }
  const auto& m = std::get<HomoscedasticMseModel>(model);
  const auto mean = predict_mean(m, apply(m.normalizer, raw_features));
  std::vector<GaussianPrediction> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) out[i] = {mean[i], m.residual_sd * m.residual_sd, m.residual_sd};
  return out;
}

}  // namespace heterloss
