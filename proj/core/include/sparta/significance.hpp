#pragma once

#include <span>

namespace sparta {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;  // two-sided
  double mean_difference = 0.0;
  std::size_t n = 0;
};

/// Paired t-test on differences a_i - b_i with n - 1 degrees of freedom.
/// All-zero differences give p = 1; zero variance with a nonzero mean gives
/// |t| = inf and p = 0.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace sparta
