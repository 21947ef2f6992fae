#pragma once

namespace pvalert {

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
///
/// Evaluated by the power series when x < a + 1 and by the Lentz continued
/// fraction for the complement otherwise, so each branch converges fast and
/// the returned value carries absolute error below 1e-12. Requires a > 0 and
/// x >= 0; x may be +inf.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed without
/// cancellation in the upper tail.
double regularized_gamma_q(double a, double x);

/// Chi-square CDF G_k(x) with `dof` degrees of freedom.
double chi_square_cdf(double x, double dof);

/// Chi-square upper tail 1 - G_k(x).
double chi_square_sf(double x, double dof);

/// Standard normal CDF.
double normal_cdf(double z);

}  // namespace pvalert
