#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "pvalert/pvalue.hpp"

namespace pvalert {

struct McdOptions {
  double trim_fraction = 0.85;  // h, in (0.5, 1]
  int starts = 20;
  int max_iter = 50;
  std::uint64_t seed = 0;
  double ridge = 0.0;  // added to the covariance diagonal of every fit
};

/// ceil(trim_fraction * n), guarded against representation error in the
/// product (0.85 * 100 must give 85, not 86).
std::size_t trimmed_subset_size(std::size_t n, double trim_fraction);

/// Sample mean and unbiased (n - 1) covariance of the selected rows of `data`
/// (one observation per row), plus `ridge` on the diagonal.
MultivariateGaussian fit_gaussian(const Eigen::MatrixXd& data, const std::vector<std::size_t>& rows,
                                  double ridge = 0.0);

struct ConcentrationResult {
  std::vector<std::size_t> subset;  // sorted row indices
  std::vector<double> log_determinants;  // one per fitted subset, in order
  bool converged = false;
};

/// Concentration steps from `initial`: fit on the subset, keep the rows with
/// the smallest Mahalanobis distances under that fit, repeat until the subset
/// is unchanged or `max_iter` steps have run. Throws ModelError if a fit is
/// singular.
ConcentrationResult concentrate(const Eigen::MatrixXd& data, std::vector<std::size_t> initial,
                                int max_iter, double ridge = 0.0);

/// Trimmed Gaussian fit approximating the minimum covariance determinant
/// estimator: `starts` random subsets of size ceil(h n) are concentrated, the
/// one with the smallest covariance determinant wins, and the returned model
/// is fitted on it. With h = 1 this is the sample mean and covariance.
///
/// Requires n >= minimum_fit_size(d, h); ModelError if every start is
/// singular.
/// d + 1 for an untrimmed fit, d + 2 otherwise.
std::size_t minimum_fit_size(std::size_t dim, double trim_fraction);

MultivariateGaussian robust_gaussian_fit(const std::vector<Eigen::VectorXd>& vectors,
                                         const McdOptions& options);

struct GaussianDetectorOptions {
  std::size_t warmup = 150;
  std::size_t refit_every = 1;
  std::size_t history_capacity = 0;  // 0 keeps every vector
  McdOptions mcd;
};

/// Streaming Gaussian detector: collects `warmup` vectors, fits, then scores
/// every new vector against the current fit before adding it to the history
/// and refitting.
class StreamingGaussianDetector {
 public:
  StreamingGaussianDetector(Eigen::Index dim, GaussianDetectorOptions options);

  /// Rebuilds a detector from saved state; the model is taken as given.
  static StreamingGaussianDetector restore(Eigen::Index dim, GaussianDetectorOptions options,
                                           std::deque<Eigen::VectorXd> history,
                                           std::optional<MultivariateGaussian> model,
                                           std::size_t since_refit, std::uint64_t refits);

  /// None during warmup, otherwise the p-value of x under the pre-refit model.
  std::optional<PValue> step(const Eigen::VectorXd& x);

  [[nodiscard]] Eigen::Index dim() const { return dim_; }
  [[nodiscard]] const GaussianDetectorOptions& options() const { return options_; }
  [[nodiscard]] const std::optional<MultivariateGaussian>& model() const { return model_; }
  [[nodiscard]] const std::deque<Eigen::VectorXd>& history() const { return history_; }
  [[nodiscard]] std::size_t since_refit() const { return since_refit_; }
  [[nodiscard]] std::uint64_t refits() const { return refits_; }

 private:
  void push(const Eigen::VectorXd& x);
  void refit();

  Eigen::Index dim_;
  GaussianDetectorOptions options_;
  std::deque<Eigen::VectorXd> history_;
  std::optional<MultivariateGaussian> model_;
  std::size_t since_refit_ = 0;
  std::uint64_t refits_ = 0;
};

}  // namespace pvalert
