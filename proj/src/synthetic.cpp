#include "heterloss/synthetic.hpp"

#include <cmath>
#include <set>

#include "heterloss/errors.hpp"
#include "heterloss/rng.hpp"

namespace heterloss {

std::vector<double> drive_test_frequencies() { return {449.0, 915.0, 1802.0, 2695.0, 3602.0, 5850.0}; }

SyntheticSpec SyntheticSpec::defaults() {
  SyntheticSpec s;
  s.groups = {
      {"London", 10.0, 3000.0, 0.15, 55.0},       {"Merthyr Tydfil", 20.0, 5000.0, 0.25, 40.0},
      {"Nottingham", 10.0, 4000.0, 0.20, 45.0},   {"Southampton", 15.0, 5000.0, 0.25, 40.0},
      {"Stevenage", 10.0, 4000.0, 0.30, 35.0},    {"Boston", 20.0, 5000.0, 0.35, 30.0},
  };
  return s;
}

void SyntheticSpec::validate() const {
  if (groups.empty()) throw ConfigError("groups: at least one group is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    const std::string where = "groups[" + std::to_string(i) + "]";
    if (g.name.empty() || g.name.find(',') != std::string::npos) {
      throw ConfigError(where + ".name: must be non-empty and contain no comma");
    }
    if (!names.insert(g.name).second) throw ConfigError(where + ".name: duplicate group '" + g.name + "'");
    if (!(g.distance_min_m > 0.0)) throw ConfigError(where + ".distance_min_m: must be positive");
    if (!(g.distance_max_m > g.distance_min_m)) {
      throw ConfigError(where + ".distance_max_m: must exceed distance_min_m");
    }
    if (!(g.obstruction_zero_prob >= 0.0 && g.obstruction_zero_prob <= 1.0)) {
      throw ConfigError(where + ".obstruction_zero_prob: must be in [0, 1]");
    }
    if (!(g.obstruction_mean_m > 0.0)) throw ConfigError(where + ".obstruction_mean_m: must be positive");
  }
  if (frequencies_mhz.empty()) throw ConfigError("frequencies_mhz: at least one frequency is required");
  for (double f : frequencies_mhz)
    if (!(f > 0.0)) throw ConfigError("frequencies_mhz: values must be positive");
  if (samples_per_frequency == 0) throw ConfigError("samples_per_frequency: must be positive");
  if (!std::isfinite(beta_db_per_m)) throw ConfigError("beta_db_per_m: must be finite");
  if (!(obstruction_knee_m > 0.0)) throw ConfigError("obstruction_knee_m: must be positive");
  if (!(sigma_min_db > 0.0)) throw ConfigError("sigma_min_db: must be positive");
  if (!(sigma_gain_db >= 0.0)) throw ConfigError("sigma_gain_db: must be non-negative");
  if (!(sigma_scale_m > 0.0)) throw ConfigError("sigma_scale_m: must be positive");
}

double free_space_path_loss_db(double frequency_mhz, double distance_m) {
  return 20.0 * std::log10(distance_m * 1e-3) + 20.0 * std::log10(frequency_mhz) + 32.45;
}

double synthetic_true_mean(const SyntheticSpec& spec, double frequency_mhz, double distance_m, double obstruction_m) {
  return free_space_path_loss_db(frequency_mhz, distance_m) +
         spec.beta_db_per_m * obstruction_m / (1.0 + obstruction_m / spec.obstruction_knee_m);
}

double synthetic_true_sd(const SyntheticSpec& spec, double obstruction_m) {
  return spec.sigma_min_db + spec.sigma_gain_db * (1.0 - std::exp(-obstruction_m / spec.sigma_scale_m));
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Dataset data;
  const std::size_t total = spec.groups.size() * spec.frequencies_mhz.size() * spec.samples_per_frequency;
  data.records.reserve(total);
  data.true_mean.reserve(total);
  data.true_sd.reserve(total);
  const Rng root(spec.seed);
  for (const auto& g : spec.groups) {
    const Rng group_rng = root.split(g.name);
    for (std::size_t fi = 0; fi < spec.frequencies_mhz.size(); ++fi) {
      const double f = spec.frequencies_mhz[fi];
      Rng rng = group_rng.split(fi);
      const double log_lo = std::log10(g.distance_min_m);
      const double log_hi = std::log10(g.distance_max_m);
      for (std::size_t k = 0; k < spec.samples_per_frequency; ++k) {
        const double d = std::pow(10.0, rng.uniform(log_lo, log_hi));
        const bool clear = rng.bernoulli(g.obstruction_zero_prob);
        const double u = rng.uniform();
        const double o = clear ? 0.0 : -g.obstruction_mean_m * std::log1p(-u);
        const double eps = rng.normal();
        const double mu = synthetic_true_mean(spec, f, d, o);
        const double sd = synthetic_true_sd(spec, o);
        const double y = spec.noise ? mu + sd * eps : mu;
        data.records.push_back({f, d, o, g.name, y});
        data.true_mean.push_back(mu);
        data.true_sd.push_back(sd);
      }
    }
  }
  return data;
}

}  // namespace heterloss

#include "json.hpp"

namespace heterloss {

namespace {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& prefix = "") {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(prefix + key + ": wrong type");
  }
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  static const std::set<std::string> known = {"groups",         "frequencies_mhz",    "samples_per_frequency",
                                              "beta_db_per_m",  "obstruction_knee_m", "sigma_min_db",
                                              "sigma_gain_db",  "sigma_scale_m",      "noise",
                                              "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError(key + ": unknown field");

  SyntheticSpec s = SyntheticSpec::defaults();
  read_field(j, "frequencies_mhz", s.frequencies_mhz);
  read_field(j, "samples_per_frequency", s.samples_per_frequency);
  read_field(j, "beta_db_per_m", s.beta_db_per_m);
  read_field(j, "obstruction_knee_m", s.obstruction_knee_m);
  read_field(j, "sigma_min_db", s.sigma_min_db);
  read_field(j, "sigma_gain_db", s.sigma_gain_db);
  read_field(j, "sigma_scale_m", s.sigma_scale_m);
  read_field(j, "noise", s.noise);
  read_field(j, "seed", s.seed);
  if (j.contains("groups")) {
    if (!j["groups"].is_array()) throw ConfigError("groups: must be an array");
    s.groups.clear();
    for (std::size_t i = 0; i < j["groups"].size(); ++i) {
      const auto& g = j["groups"][i];
      const std::string prefix = "groups[" + std::to_string(i) + "].";
      if (!g.is_object()) throw ConfigError(prefix.substr(0, prefix.size() - 1) + ": must be an object");
      SyntheticGroup grp;
      read_field(g, "name", grp.name, prefix);
      read_field(g, "distance_min_m", grp.distance_min_m, prefix);
      read_field(g, "distance_max_m", grp.distance_max_m, prefix);
      read_field(g, "obstruction_zero_prob", grp.obstruction_zero_prob, prefix);
      read_field(g, "obstruction_mean_m", grp.obstruction_mean_m, prefix);
      s.groups.push_back(grp);
    }
  }
  s.validate();
  return s;
}

}  // namespace heterloss
