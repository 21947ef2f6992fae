#include "pvalert/pvalue.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pvalert/error.hpp"
#include "pvalert/special_functions.hpp"

namespace pvalert {

PValue::PValue(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InputError("p-value outside [0, 1]: " + std::to_string(value));
  }
}

AnomalyScore::AnomalyScore(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InputError("anomaly score outside [0, 1]: " + std::to_string(value));
  }
}

DiscreteModel::DiscreteModel(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ModelError("discrete model needs at least one bin");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ModelError("discrete model has a negative or non-finite probability");
    }
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    throw ModelError("discrete model probabilities sum to " + std::to_string(total));
  }
}

DiscreteModel DiscreteModel::from_counts(std::span<const std::uint64_t> counts) {
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw ModelError("discrete model from all-zero counts");
  std::vector<double> probs(counts.size());
  const auto denom = static_cast<double>(total);
  std::transform(counts.begin(), counts.end(), probs.begin(),
                 [denom](std::uint64_t c) { return static_cast<double>(c) / denom; });
  return DiscreteModel(std::move(probs));
}

UnivariateGaussian::UnivariateGaussian(double mean_, double std_) : mean(mean_), std(std_) {
  if (!std::isfinite(mean_)) throw ModelError("gaussian mean must be finite");
  if (!(std_ > 0.0) || !std::isfinite(std_)) {
    throw ModelError("gaussian std must be positive and finite");
  }
}

MultivariateGaussian::MultivariateGaussian(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const Eigen::Index d = mean_.size();
  if (d == 0) throw ModelError("multivariate gaussian needs dimension >= 1");
  if (covariance_.rows() != d || covariance_.cols() != d) {
    throw ModelError("covariance shape does not match mean dimension");
  }
  if (!mean_.allFinite() || !covariance_.allFinite()) {
    throw ModelError("multivariate gaussian has non-finite parameters");
  }
  const double scale = covariance_.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      if (std::fabs(covariance_(i, j) - covariance_(j, i)) > 1e-9 * scale) {
        throw ModelError("covariance is not symmetric");
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw ModelError("covariance is not positive definite");
  }
  lower_ = llt.matrixL();
  // Pivots that vanish relative to the largest variance mean a numerically
  // singular fit, even when LLT itself reports success.
  const double max_diag = covariance_.diagonal().maxCoeff();
  for (Eigen::Index i = 0; i < d; ++i) {
    const double pivot = lower_(i, i);
    if (!(pivot > 0.0) || pivot * pivot < 1e-13 * max_diag) {
      throw ModelError("covariance is singular");
    }
  }
}

double MultivariateGaussian::log_determinant() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

double MultivariateGaussian::squared_mahalanobis(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) {
    throw InputError("vector dimension " + std::to_string(x.size()) +
                     " does not match model dimension " + std::to_string(dim()));
  }
  if (!x.allFinite()) throw InputError("non-finite input vector");
  const Eigen::VectorXd white =
      lower_.triangularView<Eigen::Lower>().solve(x - mean_);
  return white.squaredNorm();
}

double rounded_sum(std::span<const double> values) {
  std::vector<double> partials;
  for (double x : values) {
    std::size_t used = 0;
    for (double y : partials) {
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[used++] = lo;
      x = hi;
    }
    partials.resize(used);
    partials.push_back(x);
  }
  if (partials.empty()) return 0.0;
  double hi = partials.back();
  partials.pop_back();
  double lo = 0.0;
  while (!partials.empty()) {
    const double x = hi;
    const double y = partials.back();
    partials.pop_back();
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) break;
  }
  if (!partials.empty() && ((lo < 0.0 && partials.back() < 0.0) || (lo > 0.0 && partials.back() > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

PValue pvalue_discrete(const DiscreteModel& model, std::size_t bin) {
  if (bin >= model.size()) {
    throw IndexError("bin " + std::to_string(bin) + " outside model with " +
                     std::to_string(model.size()) + " bins");
  }
  const auto probs = model.probs();
  const double level = probs[bin];
  std::vector<double> terms;
  terms.reserve(probs.size());
  for (double p : probs) {
    if (p <= level) terms.push_back(p);
  }
  return PValue(std::min(rounded_sum(terms), 1.0));
}

PValue pvalue_gaussian_1d(const UnivariateGaussian& model, double x) {
  if (!std::isfinite(x)) throw InputError("non-finite observation");
  const double z = std::fabs(x - model.mean) / model.std;
  // 2 F(-z) = erfc(z / sqrt 2)
  return PValue(std::min(std::erfc(z / std::sqrt(2.0)), 1.0));
}

double mahalanobis(const MultivariateGaussian& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::sqrt(model.squared_mahalanobis(x));
}

PValue pvalue_gaussian_nd(const MultivariateGaussian& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double m2 = model.squared_mahalanobis(x);
  return PValue(std::clamp(chi_square_sf(m2, static_cast<double>(model.dim())), 0.0, 1.0));
}

}  // namespace pvalert
