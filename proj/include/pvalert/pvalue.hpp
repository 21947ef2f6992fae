#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace pvalert {

/// Probability mass of all outcomes no more likely than the observed one.
/// Always in [0, 1].
class PValue {
 public:
  constexpr PValue() = default;
  explicit PValue(double value);

  [[nodiscard]] constexpr double value() const { return value_; }

  friend constexpr auto operator<=>(const PValue&, const PValue&) = default;

 private:
  double value_ = 1.0;
};

/// h(pv) = 1 - pv. Higher is more anomalous.
class AnomalyScore {
 public:
  constexpr AnomalyScore() = default;
  explicit AnomalyScore(double value);

  [[nodiscard]] constexpr double value() const { return value_; }

  friend constexpr auto operator<=>(const AnomalyScore&, const AnomalyScore&) = default;

 private:
  double value_ = 0.0;
};

/// Multinomial over bins 0..k-1 (counting measure).
class DiscreteModel {
 public:
  /// Entries must be non-negative and sum to 1 within 1e-12.
  explicit DiscreteModel(std::vector<double> probs);

  /// probs[i] = counts[i] / sum(counts). Requires a positive total.
  static DiscreteModel from_counts(std::span<const std::uint64_t> counts);

  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] std::span<const double> probs() const { return probs_; }
  [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

struct UnivariateGaussian {
  double mean = 0.0;
  double std = 1.0;

  UnivariateGaussian() = default;
  UnivariateGaussian(double mean, double std);
};

/// d-variate normal. The covariance is Cholesky-factorized once at
/// construction; a matrix that is asymmetric or fails to factorize is rejected
/// with ModelError.
class MultivariateGaussian {
 public:
  MultivariateGaussian(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }
  [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
  [[nodiscard]] const Eigen::MatrixXd& covariance() const { return covariance_; }
  [[nodiscard]] const Eigen::MatrixXd& cholesky_lower() const { return lower_; }

  /// log det(covariance), from the Cholesky diagonal.
  [[nodiscard]] double log_determinant() const;

  /// Squared Mahalanobis distance, via a triangular solve.
  [[nodiscard]] double squared_mahalanobis(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd lower_;
};

/// Sum of the values rounded once to the nearest double, independent of their
/// order (Shewchuk's partials with a final half-way correction).
double rounded_sum(std::span<const double> values);

/// Sum of probs[i] over every i with probs[i] <= probs[bin]; ties included.
/// The sum is rounded once, so every bin at the same level gets the same value.
PValue pvalue_discrete(const DiscreteModel& model, std::size_t bin);

/// 2 F(-|x - mean| / std) for the standard normal CDF F.
PValue pvalue_gaussian_1d(const UnivariateGaussian& model, double x);

double mahalanobis(const MultivariateGaussian& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// 1 - G_d(m(x)^2), with G_d the chi-square CDF on d = dim degrees of freedom.
PValue pvalue_gaussian_nd(const MultivariateGaussian& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

inline AnomalyScore anomaly_score(PValue pv) { return AnomalyScore(1.0 - pv.value()); }

}  // namespace pvalert
