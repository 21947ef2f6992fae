#pragma once

// Reference implementations used only by the tests. They share no code with
// the library: p-values are summed in exact rational arithmetic after
// sorting, and rounded to double once at the end.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <gmpxx.h>

#include "pvalert/pvalue.hpp"

namespace oracle {

/// Nearest double to q, ties to even.
double nearest_double(const mpq_class& q);

/// Exact value of the stored double.
mpq_class exact(double x);

/// Discrete p-value by sorting bins ascending and taking the prefix sum
/// through the last bin tied with `bin`.
pvalert::PValue oracle_pvalue_discrete(const pvalert::DiscreteModel& model, std::size_t bin);

/// Same, on exact rational probabilities.
mpq_class oracle_pvalue_rational(std::span<const mpq_class> probs, std::size_t bin);

/// Exact probability that pv <= beta, by enumerating the bins.
mpq_class oracle_alert_fraction(std::span<const mpq_class> probs, const mpq_class& beta);

/// p-values of a multinomial with the given counts, as exact ratios.
mpq_class oracle_count_pvalue(std::span<const std::uint64_t> counts, std::size_t bin);

}  // namespace oracle
