#include "pvalert/robust_gaussian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pvalert/error.hpp"

namespace pvalert {

namespace {

void check_options(const McdOptions& o) {
  if (!(o.trim_fraction > 0.5 && o.trim_fraction <= 1.0)) {
    throw ConfigError("trim fraction must lie in (0.5, 1], got " + std::to_string(o.trim_fraction));
  }
  if (o.starts < 1) throw ConfigError("mcd.starts must be >= 1");
  if (o.max_iter < 1) throw ConfigError("mcd.max_iter must be >= 1");
  if (!(o.ridge >= 0.0)) throw ConfigError("gaussian.ridge must be >= 0");
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& vectors) {
  const auto d = vectors.front().size();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(vectors.size()), d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) throw InputError("vectors of mixed dimension");
    data.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
  }
  return data;
}

// Rows of the h smallest squared distances under `model`; ties broken by row.
std::vector<std::size_t> closest_rows(const Eigen::MatrixXd& data, const MultivariateGaussian& model,
                                      std::size_t h) {
  const Eigen::MatrixXd centered = (data.rowwise() - model.mean().transpose()).transpose();
  const Eigen::MatrixXd white =
      model.cholesky_lower().triangularView<Eigen::Lower>().solve(centered);
  const Eigen::VectorXd dist = white.colwise().squaredNorm().transpose();

  std::vector<std::size_t> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto closer = [&dist](std::size_t a, std::size_t b) {
    const double da = dist(static_cast<Eigen::Index>(a));
    const double db = dist(static_cast<Eigen::Index>(b));
    return da < db || (da == db && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h) - 1, order.end(),
                   closer);
  order.resize(h);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

std::size_t trimmed_subset_size(std::size_t n, double trim_fraction) {
  const double raw = trim_fraction * static_cast<double>(n);
  const auto h = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(h, 1, n);
}

MultivariateGaussian fit_gaussian(const Eigen::MatrixXd& data, const std::vector<std::size_t>& rows,
                                  double ridge) {
  if (rows.size() < 2) throw ModelError("gaussian fit needs at least two observations");
  const Eigen::Index d = data.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (auto r : rows) mean += data.row(static_cast<Eigen::Index>(r)).transpose();
  mean /= static_cast<double>(rows.size());

  Eigen::MatrixXd centered(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    centered.row(static_cast<Eigen::Index>(i)) =
        data.row(static_cast<Eigen::Index>(rows[i])) - mean.transpose();
  }
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(rows.size() - 1);
  cov = 0.5 * (cov + cov.transpose());
  if (ridge > 0.0) cov.diagonal().array() += ridge;
  return MultivariateGaussian(std::move(mean), std::move(cov));
}

ConcentrationResult concentrate(const Eigen::MatrixXd& data, std::vector<std::size_t> initial,
                                int max_iter, double ridge) {
  ConcentrationResult result;
  std::sort(initial.begin(), initial.end());
  result.subset = std::move(initial);
  const std::size_t h = result.subset.size();

  MultivariateGaussian fit = fit_gaussian(data, result.subset, ridge);
  result.log_determinants.push_back(fit.log_determinant());
  for (int iter = 0; iter < max_iter; ++iter) {
    auto next = closest_rows(data, fit, h);
    if (next == result.subset) {
      result.converged = true;
      break;
    }
    result.subset = std::move(next);
    fit = fit_gaussian(data, result.subset, ridge);
    result.log_determinants.push_back(fit.log_determinant());
  }
  return result;
}

std::size_t minimum_fit_size(std::size_t dim, double trim_fraction) {
  return trim_fraction >= 1.0 ? dim + 1 : dim + 2;
}

MultivariateGaussian robust_gaussian_fit(const std::vector<Eigen::VectorXd>& vectors,
                                         const McdOptions& options) {
  check_options(options);
  if (vectors.empty()) throw InputError("robust fit of an empty sample");
  const auto d = static_cast<std::size_t>(vectors.front().size());
  const std::size_t n = vectors.size();
  // A plain covariance is defined from d + 1 points; trimming needs one more.
  const std::size_t min_n = minimum_fit_size(d, options.trim_fraction);
  if (n < min_n) {
    throw InputError("fit needs at least " + std::to_string(min_n) + " vectors, got " +
                     std::to_string(n));
  }
  const Eigen::MatrixXd data = stack_rows(vectors);
  const std::size_t h = trimmed_subset_size(n, options.trim_fraction);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (h == n) return fit_gaussian(data, all, options.ridge);

  std::mt19937_64 rng(options.seed);
  std::optional<ConcentrationResult> best;
  std::vector<std::size_t> perm = all;
  for (int s = 0; s < options.starts; ++s) {
    // Partial Fisher-Yates: the first h entries become a uniform random subset.
    for (std::size_t i = 0; i < h; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(perm[i], perm[pick(rng)]);
    }
    std::vector<std::size_t> start(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(h));
    try {
      auto c = concentrate(data, std::move(start), options.max_iter, options.ridge);
      if (!best || c.log_determinants.back() < best->log_determinants.back()) best = std::move(c);
    } catch (const ModelError&) {
      // singular start; try the next one
    }
  }
  if (!best) throw ModelError("covariance singular on every concentration start");
  return fit_gaussian(data, best->subset, options.ridge);
}

StreamingGaussianDetector::StreamingGaussianDetector(Eigen::Index dim,
                                                     GaussianDetectorOptions options)
    : dim_(dim), options_(std::move(options)) {
  if (dim_ < 1) throw ConfigError("gaussian detector dimension must be >= 1");
  const std::size_t min_n = minimum_fit_size(static_cast<std::size_t>(dim_), options_.mcd.trim_fraction);
  if (options_.warmup < min_n) {
    throw ConfigError("gaussian.warmup must be at least " + std::to_string(min_n));
  }
  if (options_.refit_every < 1) throw ConfigError("gaussian.refit_every must be >= 1");
  if (options_.history_capacity != 0 && options_.history_capacity < options_.warmup) {
    throw ConfigError("gaussian.history must be 0 or at least gaussian.warmup");
  }
  check_options(options_.mcd);
}

StreamingGaussianDetector StreamingGaussianDetector::restore(
    Eigen::Index dim, GaussianDetectorOptions options, std::deque<Eigen::VectorXd> history,
    std::optional<MultivariateGaussian> model, std::size_t since_refit, std::uint64_t refits) {
  StreamingGaussianDetector det(dim, std::move(options));
  for (const auto& v : history) {
    if (v.size() != dim) throw InputError("restored history vector has wrong dimension");
  }
  if (model && model->dim() != dim) throw InputError("restored model has wrong dimension");
  det.history_ = std::move(history);
  det.model_ = std::move(model);
  det.since_refit_ = since_refit;
  det.refits_ = refits;
  return det;
}

void StreamingGaussianDetector::push(const Eigen::VectorXd& x) {
  history_.push_back(x);
  if (options_.history_capacity != 0 && history_.size() > options_.history_capacity) {
    history_.pop_front();
  }
}

void StreamingGaussianDetector::refit() {
  McdOptions mcd = options_.mcd;
  // Each refit draws its starts from its own stream so that a restored
  // detector continues exactly where the saved one stopped.
  std::seed_seq seq{static_cast<std::uint32_t>(mcd.seed), static_cast<std::uint32_t>(mcd.seed >> 32),
                    static_cast<std::uint32_t>(refits_), static_cast<std::uint32_t>(refits_ >> 32)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  mcd.seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];

  const std::vector<Eigen::VectorXd> sample(history_.begin(), history_.end());
  model_ = robust_gaussian_fit(sample, mcd);
  ++refits_;
  since_refit_ = 0;
}

std::optional<PValue> StreamingGaussianDetector::step(const Eigen::VectorXd& x) {
  if (x.size() != dim_) throw InputError("vector dimension does not match detector");
  if (!x.allFinite()) throw InputError("non-finite input vector");
  if (!model_) {
    push(x);
    if (history_.size() >= options_.warmup) refit();
    return std::nullopt;
  }
  const PValue pv = pvalue_gaussian_nd(*model_, x);
  push(x);
  if (++since_refit_ >= options_.refit_every) refit();
  return pv;
}

}  // namespace pvalert
