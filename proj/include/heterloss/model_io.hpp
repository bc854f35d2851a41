#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "heterloss/baselines.hpp"
#include "heterloss/hetero_model.hpp"

namespace heterloss {

inline constexpr const char* kModelFormatVersion = "heterloss-model-v1";

/// Any model that can be saved, loaded and queried for (mean, sd) per link.
using PathLossModel = std::variant<HeteroModel, HomoscedasticMseModel>;

/// "shared", "partial", "independent" or "mse".
std::string architecture_tag(const PathLossModel& model);

/// JSON document: version, architecture, input_dim, normalization, networks
/// (spec, activations, dropout_rate, row-major weights), residual_sd for "mse".
std::string serialize_model(const PathLossModel& model);
PathLossModel deserialize_model(const std::string& json_text);

void save_model(const PathLossModel& model, const std::filesystem::path& path);
/// Throws InputError for unreadable or malformed files.
PathLossModel load_model(const std::filesystem::path& path);

/// Raw features (frequency MHz, distance m, obstruction m per row) to Gaussian
/// predictions, normalised with the model's own statistics. Infer mode.
std::vector<GaussianPrediction> predict_links(const PathLossModel& model, const Matrix& raw_features);

}  // namespace heterloss
