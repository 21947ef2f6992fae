#include "pvalert/regulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvalert/error.hpp"

namespace pvalert {

AlertBudget::AlertBudget(double alerts_per_second) : rate_bound(alerts_per_second) {
  if (!(alerts_per_second > 0.0) || !std::isfinite(alerts_per_second)) {
    throw ConfigError("alert budget must be a positive rate");
  }
}

double fixed_threshold(double max_alerts, double expected_events) {
  if (!(max_alerts > 0.0) || !(expected_events > 0.0) || !std::isfinite(max_alerts) ||
      !std::isfinite(expected_events)) {
    throw ConfigError("fixed threshold needs positive M and N");
  }
  return std::min(max_alerts / expected_events, 1.0);
}

double wait_time_threshold(const AlertBudget& budget, double t_now, double t_prev) {
  const double gap = t_now - t_prev;
  if (!(gap >= 0.0)) throw OrderingError("wait-time threshold with decreasing timestamps");
  return std::clamp(budget.rate_bound * gap, 0.0, 1.0);
}

RateEstimator::RateEstimator(double interval_seconds, std::size_t window_intervals,
                             std::optional<double> origin)
    : interval_(interval_seconds), window_(window_intervals), origin_(origin) {
  if (!(interval_seconds > 0.0) || !std::isfinite(interval_seconds)) {
    throw ConfigError("rate estimator interval must be positive");
  }
  if (window_intervals < 1) throw ConfigError("regulator.window_intervals must be >= 1");
  if (origin && !std::isfinite(*origin)) throw ConfigError("rate estimator origin must be finite");
}

void RateEstimator::complete_interval(std::uint64_t count) {
  recent_.push_back(count);
  recent_sum_ += count;
  if (recent_.size() > window_) {
    recent_sum_ -= recent_.front();
    recent_.pop_front();
  }
  ++completed_;
}

void RateEstimator::observe(double t) {
  if (!std::isfinite(t)) throw InputError("non-finite timestamp");
  if (!origin_) origin_ = t;
  const double offset = (t - *origin_) / interval_;
  if (offset < static_cast<double>(index_)) {
    throw OrderingError("event at t=" + std::to_string(t) + " precedes the current interval");
  }
  const auto target = static_cast<std::int64_t>(std::floor(offset));
  if (target > index_) {
    const std::int64_t crossed = target - index_;
    complete_interval(count_);
    // Skipped intervals are empty; beyond the window they no longer matter.
    const std::int64_t empties = crossed - 1;
    const auto tracked = std::min<std::int64_t>(empties, static_cast<std::int64_t>(window_));
    for (std::int64_t i = 0; i < tracked; ++i) complete_interval(0);
    completed_ += static_cast<std::uint64_t>(empties - tracked);
    count_ = 0;
    index_ = target;
  }
  ++count_;
}

double RateEstimator::last_rate() const {
  if (recent_.empty()) return 0.0;
  return static_cast<double>(recent_sum_) / (static_cast<double>(recent_.size()) * interval_);
}

double adaptive_threshold(const AlertBudget& budget, const RateEstimator& estimator,
                          double warmup_beta) {
  if (!estimator.has_rate()) return std::clamp(warmup_beta, 0.0, 1.0);
  const double rate = estimator.last_rate();
  if (rate <= 0.0) return 1.0;
  return std::clamp(budget.rate_bound / rate, 0.0, 1.0);
}

void SharedRateEstimator::observe(double t) {
  std::lock_guard lock(mu_);
  estimator_.observe(t);
}

SharedRateEstimator::Snapshot SharedRateEstimator::snapshot() const {
  std::lock_guard lock(mu_);
  return {estimator_.current_interval_index(), estimator_.completed_intervals(),
          estimator_.last_rate()};
}

double SharedRateEstimator::threshold_then_observe(const AlertBudget& budget, double t,
                                                   double warmup_beta) {
  std::lock_guard lock(mu_);
  const double beta = adaptive_threshold(budget, estimator_, warmup_beta);
  estimator_.observe(t);
  return beta;
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Fixed:
      return "fixed";
    case PolicyKind::Adaptive:
      return "adaptive";
    case PolicyKind::WaitTime:
      return "waittime";
  }
  return "?";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view text) {
  if (text == "fixed") return PolicyKind::Fixed;
  if (text == "adaptive") return PolicyKind::Adaptive;
  if (text == "waittime") return PolicyKind::WaitTime;
  return std::nullopt;
}

ThresholdPolicy ThresholdPolicy::fixed(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("fixed beta must lie in [0, 1]");
  return ThresholdPolicy(Fixed{beta});
}

ThresholdPolicy ThresholdPolicy::adaptive(AlertBudget budget, RateEstimator estimator,
                                          double warmup_beta) {
  if (!(warmup_beta >= 0.0 && warmup_beta <= 1.0)) {
    throw ConfigError("regulator.warmup_beta must lie in [0, 1]");
  }
  return ThresholdPolicy(Adaptive{budget, std::move(estimator), warmup_beta});
}

ThresholdPolicy ThresholdPolicy::wait_time(AlertBudget budget, double warmup_beta) {
  if (!(warmup_beta >= 0.0 && warmup_beta <= 1.0)) {
    throw ConfigError("regulator.warmup_beta must lie in [0, 1]");
  }
  return ThresholdPolicy(WaitTime{budget, std::nullopt, warmup_beta});
}

PolicyKind ThresholdPolicy::kind() const {
  return static_cast<PolicyKind>(state_.index());
}

double ThresholdPolicy::current_beta(double t) const {
  struct Visitor {
    double t;
    double operator()(const Fixed& f) const { return f.beta; }
    double operator()(const Adaptive& a) const {
      return adaptive_threshold(a.budget, a.estimator, a.warmup_beta);
    }
    double operator()(const WaitTime& w) const {
      if (!w.last_time) return w.warmup_beta;
      return wait_time_threshold(w.budget, t, *w.last_time);
    }
  };
  return std::visit(Visitor{t}, state_);
}

double ThresholdPolicy::admit(double t) {
  const double beta = current_beta(t);
  if (auto* a = std::get_if<Adaptive>(&state_)) {
    a->estimator.observe(t);
  } else if (auto* w = std::get_if<WaitTime>(&state_)) {
    w->last_time = t;
  }
  return beta;
}

}  // namespace pvalert
