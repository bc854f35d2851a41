#include "heterloss/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "heterloss/errors.hpp"
#include "text_util.hpp"

namespace heterloss {

std::optional<std::string> validate(const LinkRecord& r) {
  if (!(std::isfinite(r.frequency_mhz) && r.frequency_mhz > 0.0)) return "frequency must be positive";
  if (!(std::isfinite(r.distance_m) && r.distance_m > 0.0)) return "distance must be positive";
  if (!(std::isfinite(r.obstruction_m) && r.obstruction_m >= 0.0)) return "obstruction depth must be non-negative";
  if (!std::isfinite(r.path_loss_db)) return "path loss must be finite";
  if (r.group.empty()) return "group label is empty";
  return std::nullopt;
}

std::vector<std::string> Dataset::groups() const {
  std::set<std::string> g;
  for (const auto& r : records) g.insert(r.group);
  return {g.begin(), g.end()};
}

std::map<std::string, std::vector<std::size_t>> Dataset::group_rows() const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < records.size(); ++i) out[records[i].group].push_back(i);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.records.reserve(rows.size());
  for (std::size_t i : rows) d.records.push_back(records.at(i));
  if (has_oracle()) {
    for (std::size_t i : rows) {
      d.true_mean.push_back(true_mean[i]);
      d.true_sd.push_back(true_sd[i]);
    }
  }
  return d;
}

std::vector<double> Dataset::targets(std::span<const std::size_t> rows) const {
  std::vector<double> y;
  y.reserve(rows.size());
  for (std::size_t i : rows) y.push_back(records.at(i).path_loss_db);
  return y;
}

std::vector<double> Dataset::targets() const {
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.path_loss_db);
  return y;
}

LoadResult parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (!text::trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw InputError(source + ": empty file");

  const auto header = text::split(line, ',');
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (text::trim(header[i]) == name) return i;
    throw InputError(source + ": missing column '" + name + "'");
  };
  const std::size_t c_f = column(schema.frequency);
  const std::size_t c_d = column(schema.distance);
  const std::size_t c_o = column(schema.obstruction);
  const std::size_t c_g = column(schema.group);
  const std::size_t c_y = column(schema.path_loss);
  std::optional<std::size_t> c_mu;
  std::optional<std::size_t> c_sigma;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (text::trim(header[i]) == "true_mu") c_mu = i;
    if (text::trim(header[i]) == "true_sigma") c_sigma = i;
  }
  const bool oracle = c_mu && c_sigma;

  LoadResult result;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != header.size()) {
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    auto number = [&](std::size_t c, const std::string& name) {
      const auto v = text::parse_double(text::trim(fields[c]));
      if (!v) {
        throw InputError(source + ":" + std::to_string(line_no) + ": cannot parse " + name + " '" +
                         std::string(text::trim(fields[c])) + "'");
      }
      return *v;
    };
    LinkRecord r;
    r.frequency_mhz = number(c_f, schema.frequency);
    r.distance_m = number(c_d, schema.distance);
    r.obstruction_m = number(c_o, schema.obstruction);
    r.group = std::string(text::trim(fields[c_g]));
    r.path_loss_db = number(c_y, schema.path_loss);
    if (auto why = validate(r)) {
      result.rejected.push_back({line_no, *why});
      continue;
    }
    result.dataset.records.push_back(std::move(r));
    if (oracle) {
      result.dataset.true_mean.push_back(number(*c_mu, "true_mu"));
      result.dataset.true_sd.push_back(number(*c_sigma, "true_sigma"));
    }
  }
  return result;
}

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse_csv(in, schema, path.string());
}

void write_csv(const Dataset& data, std::ostream& out, const CsvSchema& schema, bool oracle_columns) {
  const bool oracle = oracle_columns && data.has_oracle();
  out << schema.frequency << ',' << schema.distance << ',' << schema.obstruction << ',' << schema.group << ','
      << schema.path_loss;
  if (oracle) out << ",true_mu,true_sigma";
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    out << text::format_double(r.frequency_mhz) << ',' << text::format_double(r.distance_m) << ','
        << text::format_double(r.obstruction_m) << ',' << r.group << ',' << text::format_double(r.path_loss_db);
    if (oracle) out << ',' << text::format_double(data.true_mean[i]) << ',' << text::format_double(data.true_sd[i]);
    out << '\n';
  }
}

void write_csv(const Dataset& data, const std::filesystem::path& path, const CsvSchema& schema,
               bool oracle_columns) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_csv(data, out, schema, oracle_columns);
}

// --- normalisation ---------------------------------------------------------

std::string to_string(FeatureTransform t) { return t == FeatureTransform::Log10 ? "log10" : "linear"; }

FeatureTransform feature_transform_from_string(const std::string& s) {
  if (s == "log10") return FeatureTransform::Log10;
  if (s == "linear") return FeatureTransform::Linear;
  throw InputError("unknown feature transform '" + s + "'");
}

std::array<double, kFeatureCount> raw_features(const LinkRecord& r) {
  return {r.frequency_mhz, r.distance_m, r.obstruction_m};
}

namespace {

double forward_transform(FeatureTransform t, double v) { return t == FeatureTransform::Log10 ? std::log10(v) : v; }
double inverse_transform(FeatureTransform t, double v) {
  return t == FeatureTransform::Log10 ? std::pow(10.0, v) : v;
}

}  // namespace

NormStats fit_normalizer(const Dataset& data, std::span<const std::size_t> train_rows) {
  if (train_rows.empty()) throw InputError("fit_normalizer: no training rows");
  NormStats stats;
  stats.features = {{"frequency", FeatureTransform::Log10, 0.0, 1.0},
                    {"distance", FeatureTransform::Log10, 0.0, 1.0},
                    {"obstruction", FeatureTransform::Linear, 0.0, 1.0}};
  const auto n = static_cast<double>(train_rows.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    auto& fs = stats.features[f];
    double sum = 0.0;
    for (std::size_t i : train_rows) sum += forward_transform(fs.transform, raw_features(data.records.at(i))[f]);
    fs.mean = sum / n;
    double ss = 0.0;
    for (std::size_t i : train_rows) {
      const double d = forward_transform(fs.transform, raw_features(data.records[i])[f]) - fs.mean;
      ss += d * d;
    }
    fs.sd = std::sqrt(ss / n);
    if (!(fs.sd > 1e-12)) throw ConfigError("feature '" + fs.name + "' is constant on the training rows");
  }
  return stats;
}

NormStats fit_normalizer(const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return fit_normalizer(data, rows);
}

Matrix apply(const NormStats& stats, const Matrix& raw) {
  if (raw.cols() != stats.dim()) throw ShapeError("apply: feature count mismatch");
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    for (std::size_t f = 0; f < stats.dim(); ++f) {
      const auto& fs = stats.features[f];
      out(r, f) = (forward_transform(fs.transform, raw(r, f)) - fs.mean) / fs.sd;
    }
  }
  return out;
}

Matrix apply(const NormStats& stats, const Dataset& data, std::span<const std::size_t> rows) {
  Matrix raw(rows.size(), kFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = raw_features(data.records.at(rows[i]));
    std::copy(f.begin(), f.end(), raw.row(i).begin());
  }
  return apply(stats, raw);
}

Matrix apply(const NormStats& stats, const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return apply(stats, data, rows);
}

Matrix denormalize(const NormStats& stats, const Matrix& normalized) {
  if (normalized.cols() != stats.dim()) throw ShapeError("denormalize: feature count mismatch");
  Matrix out(normalized.rows(), normalized.cols());
  for (std::size_t r = 0; r < normalized.rows(); ++r) {
    for (std::size_t f = 0; f < stats.dim(); ++f) {
      const auto& fs = stats.features[f];
      out(r, f) = inverse_transform(fs.transform, normalized(r, f) * fs.sd + fs.mean);
    }
  }
  return out;
}

}  // namespace heterloss
