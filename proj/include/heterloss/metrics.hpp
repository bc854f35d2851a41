#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace heterloss {

/// Aligned ground truth, predicted mean and predicted SD (all dB).
/// Homoscedastic models carry a constant `sd`.
struct PredictionSet {
  std::vector<double> truth;
  std::vector<double> mean;
  std::vector<double> sd;

  [[nodiscard]] std::size_t size() const { return truth.size(); }
  /// Throws InputError on length mismatch or N = 0, DomainError on sd <= 0.
  void validate() const;
};

/// Symmetric prediction interval mean -/+ z*sd for each sample.
struct Interval {
  std::vector<double> lower;
  std::vector<double> upper;
  double confidence = 0.95;
  double z = 0.0;
};

/// One row of the accuracy / calibration / sharpness / normality tables.
struct MetricsRow {
  double rmse = 0.0;
  double nll = 0.0;
  double picp = 0.0;
  double mpiw = 0.0;
  double kurtosis = 0.0;  // excess
  double skewness = 0.0;
};

double rmse(const PredictionSet& p);

/// Mean of 0.5*log(2*pi*sd^2) + (y - mean)^2 / (2*sd^2).
double gaussian_nll(const PredictionSet& p);

/// Two-sided standard-normal critical value: P(|Z| <= z) = confidence.
double z_critical(double confidence);

Interval intervals(const PredictionSet& p, double confidence);

/// Fraction of truths inside their interval; a truth on a bound counts as covered.
double picp(std::span<const double> truth, const Interval& iv);

double mpiw(const Interval& iv);

struct Moments {
  double kurtosis = 0.0;  // excess: m4/m2^2 - 3
  double skewness = 0.0;  // m3/m2^1.5
};

/// Population moments of the standardised residuals (y - mean)/sd.
/// Needs N >= 4; throws DegenerateError when the residuals have zero variance.
Moments standardized_moments(const PredictionSet& p);
Moments sample_moments(std::span<const double> r);

/// All metrics at one confidence level.
MetricsRow evaluate(const PredictionSet& p, double confidence = 0.95);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  std::size_t dof = 0;
  double mean_difference = 0.0;
  /// Differences have zero variance: t is 0 (identical inputs) or +/-inf.
  bool degenerate = false;
};

/// Paired t-test on a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Per-comparison threshold alpha / m.
double bonferroni(double alpha, std::size_t comparisons);

}  // namespace heterloss
