#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pvalert/pvalue.hpp"

namespace pvalert {

/// MAP multinomial under a uniform prior: every bin starts with one count, so
/// probs[i] = (1 + observed_i) / (k + n).
///
/// P-values are computed on the integer counts. Because all bins share the
/// denominator `total`, comparing counts is the same as comparing the implied
/// probabilities, and the result is the exact ratio rounded once.
class StreamingMultinomial {
 public:
  /// k >= 2, otherwise ConfigError.
  explicit StreamingMultinomial(std::size_t k);

  /// Rebuild from saved counts (each >= 1).
  static StreamingMultinomial from_counts(std::vector<std::uint64_t> counts);

  [[nodiscard]] std::size_t size() const { return counts_.size(); }
  [[nodiscard]] std::uint64_t total() const { return total_; }
  [[nodiscard]] std::span<const std::uint64_t> counts() const { return counts_; }
  [[nodiscard]] double probability(std::size_t bin) const;
  [[nodiscard]] DiscreteModel model() const;

  /// P-value of `bin` under the current model, without updating.
  [[nodiscard]] PValue pvalue(std::size_t bin) const;

  /// Scores `bin` against the current model, then counts it.
  PValue score_then_update(std::size_t bin);

  void update(std::size_t bin);

 private:
  StreamingMultinomial() = default;
  void check_bin(std::size_t bin) const;

  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

}  // namespace pvalert
