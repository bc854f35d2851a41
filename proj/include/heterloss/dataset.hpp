#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heterloss/matrix.hpp"

namespace heterloss {

/// One measured link: the three model features, its drive-test group, and the target.
struct LinkRecord {
  double frequency_mhz = 0.0;
  double distance_m = 0.0;
  double obstruction_m = 0.0;
  std::string group;
  double path_loss_db = 0.0;
};

/// Reason a record violates the schema invariants, or nullopt if it is valid.
std::optional<std::string> validate(const LinkRecord& r);

/// Immutable-by-convention collection of link records.
struct Dataset {
  std::vector<LinkRecord> records;
  /// Optional per-row ground truth (synthetic data only).
  std::vector<double> true_mean;
  std::vector<double> true_sd;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] bool has_oracle() const { return !true_mean.empty(); }

  /// Group labels in sorted order.
  [[nodiscard]] std::vector<std::string> groups() const;
  /// Row indices per group label.
  [[nodiscard]] std::map<std::string, std::vector<std::size_t>> group_rows() const;

  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;
  [[nodiscard]] std::vector<double> targets(std::span<const std::size_t> rows) const;
  [[nodiscard]] std::vector<double> targets() const;
};

/// Column names used by load_csv / write_csv.
struct CsvSchema {
  std::string frequency = "freq_mhz";
  std::string distance = "dist_m";
  std::string obstruction = "obs_m";
  std::string group = "group";
  std::string path_loss = "pl_db";
};

struct RowRejection {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  Dataset dataset;
  std::vector<RowRejection> rejected;
};

/// Reads a header-led comma separated file. Rows that parse but violate the
/// record invariants are skipped and listed in `rejected`; structural problems
/// (missing column, unparsable number, empty file) throw InputError.
LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
LoadResult parse_csv(std::istream& in, const CsvSchema& schema = {}, const std::string& source = "<stream>");

/// Writes the dataset; appends true_mu,true_sigma columns when requested and available.
void write_csv(const Dataset& data, const std::filesystem::path& path, const CsvSchema& schema = {},
               bool oracle_columns = false);
void write_csv(const Dataset& data, std::ostream& out, const CsvSchema& schema = {}, bool oracle_columns = false);

enum class FeatureTransform { Log10, Linear };

struct FeatureStats {
  std::string name;
  FeatureTransform transform = FeatureTransform::Linear;
  double mean = 0.0;
  double sd = 1.0;
  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

/// Per-feature z-scoring fitted on training rows only: frequency and distance
/// are log10-transformed first, obstruction depth is used linearly because it
/// has exact zeros.
struct NormStats {
  std::vector<FeatureStats> features;

  [[nodiscard]] std::size_t dim() const { return features.size(); }
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

inline constexpr std::size_t kFeatureCount = 3;

/// Raw (untransformed) feature row in model order: frequency, distance, obstruction.
std::array<double, kFeatureCount> raw_features(const LinkRecord& r);

NormStats fit_normalizer(const Dataset& data, std::span<const std::size_t> train_rows);
NormStats fit_normalizer(const Dataset& data);

/// Normalised feature matrix for the given rows.
Matrix apply(const NormStats& stats, const Dataset& data, std::span<const std::size_t> rows);
Matrix apply(const NormStats& stats, const Dataset& data);
/// Normalise raw feature rows (cols = kFeatureCount).
Matrix apply(const NormStats& stats, const Matrix& raw);
/// Inverse of apply on raw feature rows.
Matrix denormalize(const NormStats& stats, const Matrix& normalized);

std::string to_string(FeatureTransform t);
FeatureTransform feature_transform_from_string(const std::string& s);

}  // namespace heterloss
