#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "pvalert/features.hpp"
#include "pvalert/multinomial.hpp"
#include "pvalert/robust_gaussian.hpp"

namespace pvalert {

// Versioned text snapshots of detector state. Counts are written as exact
// integers and doubles in shortest round-trip form, so restore(save(x)) is
// bit-identical.
//
//   pvalert-multinomials 1
//   <count>
//   <ip> <port|pcr> <k> <c_0> ... <c_{k-1}>          (one line per detector)
//
//   pvalert-gaussian 1
//   dim <d>
//   options <warmup> <refit_every> <history_capacity> <trim> <starts> <max_iter> <seed> <ridge>
//   state <since_refit> <refits>
//   model none | model <mean_1..d> <cov row-major d*d>
//   history <count>
//   <x_1 .. x_d>                                      (one line per vector)

using MultinomialEntry = std::pair<DetectorKey, StreamingMultinomial>;

void write_multinomials(std::ostream& out, std::vector<MultinomialEntry> entries);
std::vector<MultinomialEntry> read_multinomials(std::istream& in);

void write_gaussian_detector(std::ostream& out, const StreamingGaussianDetector& det);
StreamingGaussianDetector read_gaussian_detector(std::istream& in);

}  // namespace pvalert
