#include "sparta/significance.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sparta/error.hpp"

namespace sparta {
namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error("incomplete beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("incomplete beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw Error("t distribution: degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("paired t-test: sample lengths differ (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  if (a.size() < 2) throw Error("paired t-test needs at least 2 pairs");
  TTestResult r;
  r.n = a.size();
  const double n = static_cast<double>(r.n);
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double di = a[i] - b[i];
    all_zero = all_zero && di == 0.0;
    ss += (di - mean) * (di - mean);
  }
  r.mean_difference = mean;
  if (all_zero) {
    r.t = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  const double x = (n - 1.0) / (n - 1.0 + r.t * r.t);
  r.p_value = regularized_incomplete_beta(0.5 * (n - 1.0), 0.5, x);
  return r;
}

}  // namespace sparta
