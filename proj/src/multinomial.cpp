#include "pvalert/multinomial.hpp"

#include <numeric>
#include <string>

#include "pvalert/error.hpp"

namespace pvalert {

StreamingMultinomial::StreamingMultinomial(std::size_t k) : counts_(k, 1), total_(k) {
  if (k < 2) throw ConfigError("multinomial needs at least 2 bins, got " + std::to_string(k));
}

StreamingMultinomial StreamingMultinomial::from_counts(std::vector<std::uint64_t> counts) {
  if (counts.size() < 2) throw ConfigError("multinomial needs at least 2 bins");
  for (auto c : counts) {
    if (c < 1) throw ModelError("multinomial counts must all be >= 1");
  }
  StreamingMultinomial out;
  out.total_ = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  out.counts_ = std::move(counts);
  return out;
}

void StreamingMultinomial::check_bin(std::size_t bin) const {
  if (bin >= counts_.size()) {
    throw IndexError("bin " + std::to_string(bin) + " outside multinomial with " +
                     std::to_string(counts_.size()) + " bins");
  }
}

double StreamingMultinomial::probability(std::size_t bin) const {
  check_bin(bin);
  return static_cast<double>(counts_[bin]) / static_cast<double>(total_);
}

DiscreteModel StreamingMultinomial::model() const { return DiscreteModel::from_counts(counts_); }

PValue StreamingMultinomial::pvalue(std::size_t bin) const {
  check_bin(bin);
  const std::uint64_t level = counts_[bin];
  std::uint64_t mass = 0;
  // Branch-free so the compiler can vectorize the k = 2048 scan.
  for (const std::uint64_t c : counts_) {
    mass += c <= level ? c : 0;
  }
  return PValue(static_cast<double>(mass) / static_cast<double>(total_));
}

void StreamingMultinomial::update(std::size_t bin) {
  check_bin(bin);
  ++counts_[bin];
  ++total_;
}

PValue StreamingMultinomial::score_then_update(std::size_t bin) {
  const PValue pv = pvalue(bin);
  ++counts_[bin];
  ++total_;
  return pv;
}

}  // namespace pvalert
