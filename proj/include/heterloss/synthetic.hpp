#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "heterloss/dataset.hpp"

namespace heterloss {

/// The six drive-test measurement frequencies (MHz), ascending.
std::vector<double> drive_test_frequencies();

/// Feature distribution of one synthetic drive-test group.
struct SyntheticGroup {
  std::string name;
  double distance_min_m = 10.0;
  double distance_max_m = 5000.0;
  double obstruction_zero_prob = 0.25;  // probability of a clear (o = 0) link
  double obstruction_mean_m = 40.0;     // mean of the exponential part
};

/// Ground truth:
///   path_loss = FSPL(f, d) + beta * o / (1 + o / o0) + eps
///   FSPL      = 20 log10(d_km) + 20 log10(f_MHz) + 32.45
///   eps       ~ N(0, sigma(o)^2),  sigma(o) = sigma_min + sigma_gain * (1 - exp(-o / o_c))
struct SyntheticSpec {
  std::vector<SyntheticGroup> groups;
  std::vector<double> frequencies_mhz = drive_test_frequencies();
  std::size_t samples_per_frequency = 20'000;  // per group
  double beta_db_per_m = 0.35;
  double obstruction_knee_m = 50.0;  // o0
  double sigma_min_db = 2.0;
  double sigma_gain_db = 8.0;
  double sigma_scale_m = 30.0;  // o_c
  bool noise = true;            // false: eps = 0, targets equal the true mean
  std::uint64_t seed = 1;

  /// Six groups named after the drive-test cities with mildly different feature mixes.
  static SyntheticSpec defaults();
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

double free_space_path_loss_db(double frequency_mhz, double distance_m);
double synthetic_true_mean(const SyntheticSpec& spec, double frequency_mhz, double distance_m, double obstruction_m);
double synthetic_true_sd(const SyntheticSpec& spec, double obstruction_m);

/// Dataset with per-row oracle (true_mean, true_sd). Deterministic in spec.seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace heterloss

namespace heterloss {

/// Parses a JSON spec; absent keys keep their defaults() values. Throws
/// ConfigError naming the offending field.
SyntheticSpec synthetic_spec_from_json(const std::string& text);

}  // namespace heterloss
