#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "pvalert/pvalue.hpp"

namespace pvalert {

/// Operator bound on the alert rate, in alerts per second.
struct AlertBudget {
  double rate_bound;

  explicit AlertBudget(double alerts_per_second);
  static AlertBudget per_minute(double alerts_per_minute) { return AlertBudget(alerts_per_minute / 60.0); }
};

/// beta = min(M / N, 1) for at most M alerts out of an expected N events per
/// interval. ConfigError unless both are positive.
double fixed_threshold(double max_alerts, double expected_events);

enum class Decision : std::uint8_t { Pass, Alert };

/// Alert iff pv <= beta.
inline Decision classify(PValue pv, double beta) {
  return pv.value() <= beta ? Decision::Alert : Decision::Pass;
}

/// clamp(rate_bound * (t_now - t_prev), 0, 1).
double wait_time_threshold(const AlertBudget& budget, double t_now, double t_prev);

/// Fixed-interval event counter. The reported rate is the mean count per
/// second over the last `window` completed intervals (the previous interval
/// only, by default).
class RateEstimator {
 public:
  explicit RateEstimator(double interval_seconds, std::size_t window_intervals = 1,
                         std::optional<double> origin = std::nullopt);

  /// Counts one event at time t. The first event fixes the origin unless one
  /// was given. Crossing into a later interval completes the current one and
  /// every skipped (empty) interval. OrderingError if t precedes the current
  /// interval.
  void observe(double t);

  [[nodiscard]] double interval() const { return interval_; }
  [[nodiscard]] std::optional<double> origin() const { return origin_; }
  [[nodiscard]] std::int64_t current_interval_index() const { return index_; }
  [[nodiscard]] std::uint64_t current_count() const { return count_; }
  [[nodiscard]] std::uint64_t completed_intervals() const { return completed_; }
  [[nodiscard]] bool has_rate() const { return completed_ > 0; }

  /// Events per second over the window; 0 before any interval completes.
  [[nodiscard]] double last_rate() const;

 private:
  void complete_interval(std::uint64_t count);

  double interval_;
  std::size_t window_;
  std::optional<double> origin_;
  std::int64_t index_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t completed_ = 0;
  std::deque<std::uint64_t> recent_;  // counts of the last `window_` completed intervals
  std::uint64_t recent_sum_ = 0;
};

/// beta_k = clamp(r / r_k, 0, 1): 1 when the measured rate is zero,
/// `warmup_beta` before the first interval completes.
double adaptive_threshold(const AlertBudget& budget, const RateEstimator& estimator,
                          double warmup_beta = 0.0);

/// RateEstimator behind a mutex, for callers that count events from several
/// threads. Each call is one atomic read-modify-write.
class SharedRateEstimator {
 public:
  struct Snapshot {
    std::int64_t interval_index;
    std::uint64_t completed_intervals;
    double last_rate;
  };

  explicit SharedRateEstimator(RateEstimator estimator) : estimator_(std::move(estimator)) {}

  void observe(double t);
  [[nodiscard]] Snapshot snapshot() const;
  /// Reads beta for an event at t and then counts it, under one lock.
  double threshold_then_observe(const AlertBudget& budget, double t, double warmup_beta);

 private:
  mutable std::mutex mu_;
  RateEstimator estimator_;
};

enum class PolicyKind : std::uint8_t { Fixed, Adaptive, WaitTime };

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view text);

/// A p-value gate. `admit(t)` returns the beta in force for an event arriving
/// at t and then records the event, so the event that opens a new interval is
/// still judged by the threshold that was in force before it arrived.
class ThresholdPolicy {
 public:
  struct Fixed {
    double beta;
  };
  struct Adaptive {
    AlertBudget budget;
    RateEstimator estimator;
    double warmup_beta = 0.0;
  };
  struct WaitTime {
    AlertBudget budget;
    std::optional<double> last_time;
    double warmup_beta = 0.0;
  };

  static ThresholdPolicy fixed(double beta);
  static ThresholdPolicy adaptive(AlertBudget budget, RateEstimator estimator,
                                  double warmup_beta = 0.0);
  static ThresholdPolicy wait_time(AlertBudget budget, double warmup_beta = 0.0);

  [[nodiscard]] PolicyKind kind() const;
  /// Beta that `admit` would return for an event at t, without recording it.
  [[nodiscard]] double current_beta(double t) const;
  double admit(double t);

  [[nodiscard]] const std::variant<Fixed, Adaptive, WaitTime>& state() const { return state_; }

 private:
  explicit ThresholdPolicy(std::variant<Fixed, Adaptive, WaitTime> s) : state_(std::move(s)) {}
  std::variant<Fixed, Adaptive, WaitTime> state_;
};

}  // namespace pvalert
