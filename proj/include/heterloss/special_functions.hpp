#pragma once

namespace heterloss::special {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF for p in (0, 1).
double normal_quantile(double p);

/// Regularised incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t CDF with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

}  // namespace heterloss::special
