#include "pvalert/special_functions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pvalert/error.hpp"

namespace pvalert {

namespace {

constexpr double kEpsilon = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 100000;

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw InputError("incomplete gamma: shape must be positive and finite, got " +
                     std::to_string(a));
  }
  if (std::isnan(x) || x < 0.0) {
    throw InputError("incomplete gamma: argument must be non-negative, got " +
                     std::to_string(x));
  }
}

// exp(-x + a log x - lgamma(a)), the common prefactor of both expansions.
double gamma_prefactor(double a, double x) {
  return std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// P(a, x) by the series sum_{n>=0} x^n / (a (a+1) ... (a+n)); valid for x < a+1.
double lower_series(double a, double x) {
  double denom = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxIterations; ++n) {
    denom += 1.0;
    term *= x / denom;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEpsilon) {
      return sum * gamma_prefactor(a, x);
    }
  }
  throw ModelError("incomplete gamma series did not converge");
}

// Q(a, x) by the modified Lentz continued fraction; valid for x >= a+1.
double upper_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEpsilon) {
      return h * gamma_prefactor(a, x);
    }
  }
  throw ModelError("incomplete gamma continued fraction did not converge");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return lower_series(a, x);
  return 1.0 - upper_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - lower_series(a, x);
  return upper_continued_fraction(a, x);
}

double chi_square_cdf(double x, double dof) {
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chi_square_sf(double x, double dof) {
  return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace pvalert
