#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pvalert/config.hpp"
#include "pvalert/diagnostics.hpp"
#include "pvalert/features.hpp"
#include "pvalert/ingest.hpp"
#include "pvalert/multinomial.hpp"
#include "pvalert/regulator.hpp"
#include "pvalert/robust_gaussian.hpp"
#include "pvalert/snapshot.hpp"

namespace pvalert {

struct RegulatorSettings {
  PolicyKind kind = PolicyKind::Adaptive;
  std::optional<double> beta;             // fixed policy, explicit
  std::optional<double> max_alerts;       // fixed policy, M per interval
  std::optional<double> expected_events;  // fixed policy, N per interval
  double rate_bound_per_minute = 1.0;
  double interval = 60.0;  // seconds
  double warmup_beta = 0.0;
  std::size_t window_intervals = 1;
  std::optional<double> port_beta_override;
  std::optional<double> pcr_beta_override;

  /// Fixed beta: `beta` if given, else M / N; ConfigError if neither is set.
  [[nodiscard]] double fixed_beta() const;
};

/// Builds the gate. `origin` anchors the rate estimator's intervals.
ThresholdPolicy make_policy(const RegulatorSettings& settings, std::optional<double> origin);

struct EngineConfig {
  InternalPredicate internal{std::vector<Cidr>{*Cidr::parse("100.0.0.0/8")}};
  RegulatorSettings regulator;
  char delimiter = ',';
  double reorder_tolerance = 0.0;
  double date_offset = 0.0;
  std::string label_file;
  std::size_t workers = 1;
  std::size_t queue_capacity = 64;  // batches per shard queue
  std::uint64_t seed = 0;
  GaussianDetectorOptions gaussian;
  DiagnosticOptions diag;
  std::string grid = "log:1e-4:1e-1:20";

  /// Typed view of a Config, validating every value. `internal_cidrs` is
  /// required.
  static EngineConfig from_config(const Config& config);
};

/// The gaussian.* and mcd.* keys; mcd.seed falls back to `default_seed`.
GaussianDetectorOptions gaussian_options_from_config(const Config& config, std::uint64_t default_seed = 0);
/// The diag.thick_factor and diag.min_expected keys.
DiagnosticOptions diagnostic_options_from_config(const Config& config);

struct AlertRecord {
  std::uint64_t seq = 0;  // arrival order of the score
  double time = 0.0;
  IpAddress entity;
  Feature feature = Feature::Port;
  double pvalue = 0.0;
  double score = 0.0;
  double beta_in_force = 0.0;
  PolicyKind policy = PolicyKind::Fixed;
  std::optional<Label> label;

  friend bool operator==(const AlertRecord&, const AlertRecord&) = default;
};

/// One alert per line as space-separated key=value pairs.
std::string format_alert(const AlertRecord& alert);
std::optional<AlertRecord> parse_alert(std::string_view line);

/// Every score the engine produced, alerted or not.
struct ScoreRecord {
  std::uint64_t seq = 0;
  double time = 0.0;
  DetectorKey key;
  std::size_t bin = 0;
  double pvalue = 0.0;
  double beta = 0.0;
  bool alerted = false;
  std::optional<Label> label;
};

struct LabeledOutcome {
  bool alerted = false;
  std::optional<Label> label;
};

struct ConfusionCounts {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  std::uint64_t alerted_positives = 0;
  std::uint64_t alerted_negatives = 0;
  std::uint64_t unlabeled = 0;

  void add(bool alerted, std::optional<Label> label);
};

struct AccuracyMetrics {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> ppv;
  std::optional<std::string> warning;
};

/// tpr = alerted positives / positives, fpr = alerted negatives / negatives,
/// ppv = alerted positives / alerts. A 0/0 ratio is absent; any unlabeled
/// event skips all three with a warning.
AccuracyMetrics compute_metrics(const ConfusionCounts& counts);
AccuracyMetrics compute_metrics(std::span<const LabeledOutcome> events);

/// Histogram of alert times into consecutive dt buckets starting at `start`.
/// With `end`, the histogram covers [start, end) even where it is empty.
std::vector<std::uint64_t> alerts_per_interval(std::span<const double> alert_times, double dt,
                                               double start, std::optional<double> end = std::nullopt);

struct IntervalMetrics {
  double start = 0.0;
  std::uint64_t scores = 0;
  std::uint64_t alerts = 0;
  double rate = 0.0;  // scores per second
  double last_beta = 0.0;
};

struct RunMetrics {
  std::uint64_t flows = 0;
  std::uint64_t scores_total = 0;
  std::uint64_t alerts_total = 0;
  std::uint64_t detectors = 0;
  double interval = 60.0;
  std::optional<double> stream_start;
  std::optional<double> stream_end;
  std::vector<std::uint64_t> alerts_per_interval;
  std::vector<IntervalMetrics> intervals;
  ConfusionCounts confusion;
  AccuracyMetrics accuracy;
  IngestStats ingest;
  std::vector<std::string> warnings;
};

void write_metrics(std::ostream& out, const RunMetrics& metrics);

/// Per-entity multinomials, created on first use.
class DetectorBank {
 public:
  PValue score_then_update(const Observation& obs);

  [[nodiscard]] std::size_t size() const { return detectors_.size(); }
  [[nodiscard]] const StreamingMultinomial* find(const DetectorKey& key) const;
  void insert(DetectorKey key, StreamingMultinomial det);
  [[nodiscard]] std::vector<MultinomialEntry> entries() const;

 private:
  std::unordered_map<DetectorKey, StreamingMultinomial> detectors_;
};

struct RunCallbacks {
  std::function<void(const AlertRecord&)> on_alert;
  std::function<void(const ScoreRecord&)> on_score;
};

/// ingest -> route -> score-then-update -> gate -> sink.
///
/// The reader stage assigns each observation its arrival sequence number and
/// the beta in force, then hands it to the shard that owns its entity. With
/// one worker everything runs on the calling thread; with more, shards run on
/// their own threads behind bounded queues and the sink delivers alerts in
/// sequence order once the input is drained.
class Engine {
 public:
  explicit Engine(EngineConfig config);

  RunMetrics run(std::istream& input, const RunCallbacks& callbacks = {});

  /// Detector state across all shards, for snapshots.
  [[nodiscard]] std::vector<MultinomialEntry> detector_entries() const;
  void restore_detectors(std::vector<MultinomialEntry> entries);

  [[nodiscard]] const EngineConfig& config() const { return config_; }

 private:
  [[nodiscard]] std::size_t shard_of(const DetectorKey& key) const;

  EngineConfig config_;
  std::vector<DetectorBank> shards_;
};

}  // namespace pvalert
