#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pvalert/pvalue.hpp"

namespace pvalert {

enum class Verdict : std::uint8_t { ConsistentFit, TailsTooThick, TailsTooThin, Inconclusive };

std::string_view to_string(Verdict v);

struct DiagnosticOptions {
  double thick_factor = 2.0;
  double min_expected = 5.0;
};

/// Expected (beta * n) against realized (#{pv <= beta}) alert counts over a
/// threshold grid, with a verdict on the model's tails.
struct FitnessReport {
  std::vector<double> thresholds;
  std::vector<double> expected;
  std::vector<std::uint64_t> actual;
  std::uint64_t n = 0;
  bool equality_assumed = false;
  Verdict verdict = Verdict::Inconclusive;
  /// Geometric-mean ratio over the small-beta half of the eligible points.
  std::optional<double> small_beta_ratio;
  std::string annotation;

  /// actual / expected at grid point i; none when expected is zero.
  [[nodiscard]] std::optional<double> ratio(std::size_t i) const;
  /// Index of the grid point equal to beta, if any.
  [[nodiscard]] std::optional<std::size_t> find(double beta) const;
};

/// Verdict rules, over the grid points whose expected count is at least
/// `min_expected`:
///  - TailsTooThick when the geometric mean of actual/expected over the
///    smaller-beta half of those points exceeds `thick_factor`;
///  - TailsTooThin when it is below 1/thick_factor and equality is assumed
///    (a one-sided bound says nothing about under-production);
///  - ConsistentFit when every ratio lies in [1/f, f], or is at most f when
///    equality is not assumed;
///  - Inconclusive otherwise, including when no point is eligible.
///
/// `thresholds` must be sorted ascending within (0, 1]. InputError on an empty
/// p-value list or an out-of-range value.
FitnessReport expected_vs_actual(std::span<const double> pvalues, std::span<const double> thresholds,
                                 bool equality_assumed, const DiagnosticOptions& options = {});

/// `count` log-spaced points from lo to hi inclusive, then 1.0.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

/// "log:lo:hi:count" (1.0 appended) or "list:b1,b2,...". ConfigError if
/// malformed.
std::vector<double> parse_grid(std::string_view spec);

enum class ModelFamily : std::uint8_t { Discrete, UnivariateGaussian, MultivariateGaussian };

/// Whether the family guarantees equality in the alert-count bound for every
/// beta. True for the Gaussians (their densities have no plateaus).
bool equality_eligible(ModelFamily family);

/// The distinct p-values a discrete model attains, ascending. Equality in the
/// bound holds exactly at these thresholds.
std::vector<double> attained_levels(const DiscreteModel& model);

/// Probability that an event drawn from `model` has pv <= beta, by enumerating
/// the bins.
double expected_alert_fraction(const DiscreteModel& model, double beta);

/// Fixed-width text table.
void write_report_table(std::ostream& out, const FitnessReport& report);
/// CSV rows "beta,expected,actual,ratio" with a header line.
void write_report_csv(std::ostream& out, const FitnessReport& report);

}  // namespace pvalert
