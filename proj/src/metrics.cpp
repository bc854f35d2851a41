#include "heterloss/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "heterloss/errors.hpp"
#include "heterloss/special_functions.hpp"

namespace heterloss {

void PredictionSet::validate() const {
  if (truth.empty()) throw InputError("prediction set is empty");
  if (mean.size() != truth.size() || sd.size() != truth.size()) {
    throw InputError("prediction set arrays differ in length");
  }
  for (double s : sd)
    if (!(s > 0.0)) throw DomainError("prediction set sd must be positive");
}

double rmse(const PredictionSet& p) {
  if (p.truth.empty()) throw InputError("rmse: empty prediction set");
  if (p.mean.size() != p.truth.size()) throw InputError("rmse: length mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = p.truth[i] - p.mean[i];
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(p.size()));
}

double gaussian_nll(const PredictionSet& p) {
  p.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double var = p.sd[i] * p.sd[i];
    const double r = p.truth[i] - p.mean[i];
    total += 0.5 * std::log(2.0 * std::numbers::pi * var) + r * r / (2.0 * var);
  }
  return total / static_cast<double>(p.size());
}

double z_critical(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must be in (0, 1)");
  return special::normal_quantile(0.5 + 0.5 * confidence);
}

Interval intervals(const PredictionSet& p, double confidence) {
  p.validate();
  Interval iv;
  iv.confidence = confidence;
  iv.z = z_critical(confidence);
  iv.lower.resize(p.size());
  iv.upper.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    iv.lower[i] = p.mean[i] - iv.z * p.sd[i];
    iv.upper[i] = p.mean[i] + iv.z * p.sd[i];
  }
  return iv;
}

double picp(std::span<const double> truth, const Interval& iv) {
  if (truth.size() != iv.lower.size() || truth.size() != iv.upper.size()) throw InputError("picp: length mismatch");
  if (truth.empty()) throw InputError("picp: empty input");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (iv.lower[i] <= truth[i] && truth[i] <= iv.upper[i]) ++covered;
  return static_cast<double>(covered) / static_cast<double>(truth.size());
}

double mpiw(const Interval& iv) {
  if (iv.lower.empty()) throw InputError("mpiw: empty interval set");
  if (iv.lower.size() != iv.upper.size()) throw InputError("mpiw: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < iv.lower.size(); ++i) total += iv.upper[i] - iv.lower[i];
  return total / static_cast<double>(iv.lower.size());
}

Moments sample_moments(std::span<const double> r) {
  if (r.size() < 4) throw InputError("moments need at least 4 samples");
  const auto n = static_cast<double>(r.size());
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : r) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw DegenerateError("standardised residuals have zero variance");
  return {m4 / (m2 * m2) - 3.0, m3 / std::pow(m2, 1.5)};
}

Moments standardized_moments(const PredictionSet& p) {
  p.validate();
  std::vector<double> r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[i] = (p.truth[i] - p.mean[i]) / p.sd[i];
  return sample_moments(r);
}

MetricsRow evaluate(const PredictionSet& p, double confidence) {
  p.validate();
  const auto iv = intervals(p, confidence);
  MetricsRow row;
  row.rmse = rmse(p);
  row.nll = gaussian_nll(p);
  row.picp = picp(p.truth, iv);
  row.mpiw = mpiw(iv);
  if (p.size() >= 4) {
    try {
      const auto m = standardized_moments(p);
      row.kurtosis = m.kurtosis;
      row.skewness = m.skewness;
    } catch (const DegenerateError&) {
      row.kurtosis = std::numeric_limits<double>::quiet_NaN();
      row.skewness = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return row;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("paired_t_test: samples differ in length");
  if (a.size() < 2) throw InputError("paired_t_test: need at least 2 pairs");
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult res;
  res.dof = n - 1;
  res.mean_difference = mean;
  if (!(sd > 0.0)) {
    res.degenerate = true;
    if (mean == 0.0) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      res.p = 0.0;
    }
    return res;
  }
  res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  res.p = 2.0 * special::student_t_cdf(-std::fabs(res.t), static_cast<double>(res.dof));
  return res;
}

double bonferroni(double alpha, std::size_t comparisons) {
  if (comparisons == 0) throw DomainError("bonferroni: need at least one comparison");
  return alpha / static_cast<double>(comparisons);
}

}  // namespace heterloss
