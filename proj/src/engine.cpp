#include "pvalert/engine.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "pvalert/error.hpp"
#include "pvalert/text.hpp"

namespace pvalert {

namespace {

double checked_beta(const Config& c, std::string_view key) {
  auto v = c.get_optional_double(key);
  if (v && !(*v >= 0.0 && *v <= 1.0)) {
    throw ConfigError(std::string(key) + " must lie in [0, 1]");
  }
  return v.value_or(-1.0);
}

std::optional<double> optional_beta(const Config& c, std::string_view key) {
  const double v = checked_beta(c, key);
  return v < 0.0 ? std::nullopt : std::optional<double>(v);
}

// Batches of work cross a mutex-guarded bounded queue; producers block when
// the consumer falls behind by `capacity` batches.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || aborted_; });
    if (aborted_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

  void abort() {
    std::lock_guard lock(mu_);
    aborted_ = closed_ = true;
    items_.clear();
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  std::size_t capacity_;
  bool closed_ = false;
  bool aborted_ = false;
};

struct WorkItem {
  std::uint64_t seq;
  double time;
  Observation obs;
  double beta;
  std::optional<Label> label;
};

constexpr std::size_t kBatchSize = 512;

AlertRecord make_alert(const ScoreRecord& s, PolicyKind policy) {
  AlertRecord a;
  a.seq = s.seq;
  a.time = s.time;
  a.entity = s.key.entity;
  a.feature = s.key.feature;
  a.pvalue = s.pvalue;
  a.score = anomaly_score(PValue(s.pvalue)).value();
  a.beta_in_force = s.beta;
  a.policy = policy;
  a.label = s.label;
  return a;
}

}  // namespace

double RegulatorSettings::fixed_beta() const {
  if (beta) {
    if (!(*beta >= 0.0 && *beta <= 1.0)) throw ConfigError("regulator.beta must lie in [0, 1]");
    return *beta;
  }
  if (max_alerts && expected_events) return fixed_threshold(*max_alerts, *expected_events);
  throw ConfigError(
      "fixed policy needs regulator.beta, or regulator.max_alerts with regulator.expected_events");
}

ThresholdPolicy make_policy(const RegulatorSettings& s, std::optional<double> origin) {
  switch (s.kind) {
    case PolicyKind::Fixed:
      return ThresholdPolicy::fixed(s.fixed_beta());
    case PolicyKind::Adaptive:
      return ThresholdPolicy::adaptive(AlertBudget::per_minute(s.rate_bound_per_minute),
                                       RateEstimator(s.interval, s.window_intervals, origin),
                                       s.warmup_beta);
    case PolicyKind::WaitTime:
      return ThresholdPolicy::wait_time(AlertBudget::per_minute(s.rate_bound_per_minute),
                                        s.warmup_beta);
  }
  throw ConfigError("unknown policy");
}

GaussianDetectorOptions gaussian_options_from_config(const Config& c, std::uint64_t default_seed) {
  GaussianDetectorOptions g;
  g.warmup = c.get_uint("gaussian.warmup", 150);
  g.refit_every = c.get_uint("gaussian.refit_every", 1);
  g.history_capacity = c.get_uint("gaussian.history", 0);
  g.mcd.trim_fraction = c.get_double("gaussian.trim_fraction", 0.85);
  g.mcd.ridge = c.get_double("gaussian.ridge", 0.0);
  g.mcd.starts = static_cast<int>(c.get_uint("mcd.starts", 20));
  g.mcd.max_iter = static_cast<int>(c.get_uint("mcd.max_iter", 50));
  g.mcd.seed = c.get_uint("mcd.seed", default_seed);
  if (!(g.mcd.trim_fraction > 0.5 && g.mcd.trim_fraction <= 1.0)) {
    throw ConfigError("gaussian.trim_fraction must lie in (0.5, 1]");
  }
  if (!(g.mcd.ridge >= 0.0)) throw ConfigError("gaussian.ridge must be >= 0");
  if (g.refit_every < 1) throw ConfigError("gaussian.refit_every must be >= 1");
  if (g.mcd.starts < 1 || g.mcd.max_iter < 1) throw ConfigError("mcd.starts and mcd.max_iter must be >= 1");
  return g;
}

DiagnosticOptions diagnostic_options_from_config(const Config& c) {
  DiagnosticOptions d;
  d.thick_factor = c.get_double("diag.thick_factor", 2.0);
  d.min_expected = c.get_double("diag.min_expected", 5.0);
  if (!(d.thick_factor > 1.0)) throw ConfigError("diag.thick_factor must exceed 1");
  if (!(d.min_expected >= 0.0)) throw ConfigError("diag.min_expected must be >= 0");
  return d;
}

EngineConfig EngineConfig::from_config(const Config& c) {
  EngineConfig e;
  const auto cidrs = c.get("internal_cidrs");
  if (!cidrs) throw ConfigError("internal_cidrs is required");
  e.internal = InternalPredicate::parse(*cidrs);

  auto& r = e.regulator;
  const auto policy = c.get_string("regulator.policy", "adaptive");
  const auto kind = parse_policy_kind(policy);
  if (!kind) throw ConfigError("regulator.policy must be fixed, adaptive or waittime");
  r.kind = *kind;
  r.beta = optional_beta(c, "regulator.beta");
  r.max_alerts = c.get_optional_double("regulator.max_alerts");
  r.expected_events = c.get_optional_double("regulator.expected_events");
  r.rate_bound_per_minute = c.get_double("regulator.rate_bound", 1.0);
  if (!(r.rate_bound_per_minute > 0.0)) throw ConfigError("regulator.rate_bound must be positive");
  r.interval = c.get_double("regulator.interval", 60.0);
  if (!(r.interval > 0.0)) throw ConfigError("regulator.interval must be positive");
  r.warmup_beta = c.get_double("regulator.warmup_beta", 0.0);
  if (!(r.warmup_beta >= 0.0 && r.warmup_beta <= 1.0)) {
    throw ConfigError("regulator.warmup_beta must lie in [0, 1]");
  }
  r.window_intervals = c.get_uint("regulator.window_intervals", 1);
  if (r.window_intervals < 1) throw ConfigError("regulator.window_intervals must be >= 1");
  r.port_beta_override = optional_beta(c, "regulator.override.port.beta");
  r.pcr_beta_override = optional_beta(c, "regulator.override.pcr.beta");
  if (r.kind == PolicyKind::Fixed) (void)r.fixed_beta();

  e.delimiter = parse_delimiter(c.get_string("ingest.delimiter", ","));
  e.reorder_tolerance = c.get_double("ingest.reorder_tolerance", 0.0);
  if (!(e.reorder_tolerance >= 0.0)) throw ConfigError("ingest.reorder_tolerance must be >= 0");
  e.date_offset = c.get_double("ingest.date_offset", 0.0);
  e.label_file = c.get_string("ingest.label_file", "");

  e.workers = c.get_uint("engine.workers", 1);
  if (e.workers < 1) throw ConfigError("engine.workers must be >= 1");
  e.queue_capacity = c.get_uint("engine.queue_capacity", 64);
  if (e.queue_capacity < 1) throw ConfigError("engine.queue_capacity must be >= 1");
  e.seed = c.get_uint("engine.seed", 0);

  e.gaussian = gaussian_options_from_config(c, e.seed);
  e.diag = diagnostic_options_from_config(c);
  e.grid = c.get_string("diag.grid", e.grid);
  (void)parse_grid(e.grid);
  return e;
}

std::string format_alert(const AlertRecord& a) {
  std::string out = "seq=" + std::to_string(a.seq) + " time=" + format_double(a.time) +
                    " entity=" + a.entity.to_string() + " feature=" +
                    std::string(to_string(a.feature)) + " pvalue=" + format_double(a.pvalue) +
                    " score=" + format_double(a.score) + " beta=" + format_double(a.beta_in_force) +
                    " policy=" + std::string(to_string(a.policy));
  if (a.label) out += " label=" + std::string(to_string(*a.label));
  return out;
}

std::optional<AlertRecord> parse_alert(std::string_view line) {
  AlertRecord a;
  bool have_time = false;
  for (auto field : split(trim(line), ' ')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) return std::nullopt;
    const auto key = field.substr(0, eq);
    const auto val = field.substr(eq + 1);
    if (key == "seq") {
      auto v = parse_uint(val);
      if (!v) return std::nullopt;
      a.seq = *v;
    } else if (key == "time") {
      auto v = parse_double(val);
      if (!v) return std::nullopt;
      a.time = *v;
      have_time = true;
    } else if (key == "entity") {
      auto v = IpAddress::parse(val);
      if (!v) return std::nullopt;
      a.entity = *v;
    } else if (key == "feature") {
      auto v = parse_feature(val);
      if (!v) return std::nullopt;
      a.feature = *v;
    } else if (key == "pvalue" || key == "score" || key == "beta") {
      auto v = parse_double(val);
      if (!v) return std::nullopt;
      (key == "pvalue" ? a.pvalue : key == "score" ? a.score : a.beta_in_force) = *v;
    } else if (key == "policy") {
      auto v = parse_policy_kind(val);
      if (!v) return std::nullopt;
      a.policy = *v;
    } else if (key == "label") {
      a.label = parse_label(val);
      if (!a.label) return std::nullopt;
    }
  }
  if (!have_time) return std::nullopt;
  return a;
}

void ConfusionCounts::add(bool alerted, std::optional<Label> label) {
  if (!label) {
    ++unlabeled;
  } else if (*label == Label::Attack) {
    ++positives;
    if (alerted) ++alerted_positives;
  } else {
    ++negatives;
    if (alerted) ++alerted_negatives;
  }
}

AccuracyMetrics compute_metrics(const ConfusionCounts& c) {
  AccuracyMetrics m;
  if (c.unlabeled > 0) {
    m.warning = std::to_string(c.unlabeled) + " scored events lack labels; accuracy metrics skipped";
    return m;
  }
  const auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.tpr = ratio(c.alerted_positives, c.positives);
  m.fpr = ratio(c.alerted_negatives, c.negatives);
  m.ppv = ratio(c.alerted_positives, c.alerted_positives + c.alerted_negatives);
  return m;
}

AccuracyMetrics compute_metrics(std::span<const LabeledOutcome> events) {
  ConfusionCounts c;
  for (const auto& e : events) c.add(e.alerted, e.label);
  return compute_metrics(c);
}

std::vector<std::uint64_t> alerts_per_interval(std::span<const double> alert_times, double dt,
                                               double start, std::optional<double> end) {
  if (!(dt > 0.0)) throw ConfigError("interval must be positive");
  std::size_t buckets = 0;
  if (end && *end > start) buckets = static_cast<std::size_t>(std::ceil((*end - start) / dt));
  std::vector<std::uint64_t> hist(buckets, 0);
  for (double t : alert_times) {
    if (t < start) throw InputError("alert precedes the histogram start");
    const auto i = static_cast<std::size_t>(std::floor((t - start) / dt));
    if (i >= hist.size()) hist.resize(i + 1, 0);
    ++hist[i];
  }
  return hist;
}

void write_metrics(std::ostream& out, const RunMetrics& m) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("absent");
  };
  out << "flows=" << m.flows << '\n'
      << "scores_total=" << m.scores_total << '\n'
      << "alerts_total=" << m.alerts_total << '\n'
      << "detectors=" << m.detectors << '\n'
      << "interval=" << format_double(m.interval) << '\n'
      << "stream_start=" << opt(m.stream_start) << '\n'
      << "stream_end=" << opt(m.stream_end) << '\n'
      << "tpr=" << opt(m.accuracy.tpr) << '\n'
      << "fpr=" << opt(m.accuracy.fpr) << '\n'
      << "ppv=" << opt(m.accuracy.ppv) << '\n'
      << "positives=" << m.confusion.positives << '\n'
      << "negatives=" << m.confusion.negatives << '\n'
      << "ingest.lines=" << m.ingest.lines << '\n'
      << "ingest.records=" << m.ingest.records << '\n'
      << "ingest.parse_errors=" << m.ingest.parse_errors << '\n'
      << "ingest.ordering_errors=" << m.ingest.ordering_errors << '\n'
      << "ingest.tot_bytes_mismatches=" << m.ingest.tot_bytes_mismatches << '\n';
  for (const auto& w : m.warnings) out << "warning=" << w << '\n';
  for (std::size_t i = 0; i < m.intervals.size(); ++i) {
    const auto& iv = m.intervals[i];
    out << "interval index=" << i << " start=" << format_double(iv.start) << " scores=" << iv.scores
        << " rate=" << format_double(iv.rate) << " alerts=" << iv.alerts
        << " beta=" << format_double(iv.last_beta) << '\n';
  }
}

PValue DetectorBank::score_then_update(const Observation& obs) {
  auto it = detectors_.find(obs.key);
  if (it == detectors_.end()) {
    const std::size_t k = obs.key.feature == Feature::Port ? kPortBins : kPcrBins;
    it = detectors_.emplace(obs.key, StreamingMultinomial(k)).first;
  }
  return it->second.score_then_update(obs.bin);
}

const StreamingMultinomial* DetectorBank::find(const DetectorKey& key) const {
  auto it = detectors_.find(key);
  return it == detectors_.end() ? nullptr : &it->second;
}

void DetectorBank::insert(DetectorKey key, StreamingMultinomial det) {
  const std::size_t k = key.feature == Feature::Port ? kPortBins : kPcrBins;
  if (det.size() != k) throw InputError("restored detector has the wrong number of bins");
  detectors_.insert_or_assign(std::move(key), std::move(det));
}

std::vector<MultinomialEntry> DetectorBank::entries() const {
  return {detectors_.begin(), detectors_.end()};
}

Engine::Engine(EngineConfig config) : config_(std::move(config)), shards_(config_.workers) {
  if (config_.workers < 1) throw ConfigError("engine.workers must be >= 1");
}

std::size_t Engine::shard_of(const DetectorKey& key) const {
  return std::hash<IpAddress>{}(key.entity) % shards_.size();
}

std::vector<MultinomialEntry> Engine::detector_entries() const {
  std::vector<MultinomialEntry> all;
  for (const auto& s : shards_) {
    auto e = s.entries();
    all.insert(all.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
  }
  return all;
}

void Engine::restore_detectors(std::vector<MultinomialEntry> entries) {
  for (auto& [key, det] : entries) shards_[shard_of(key)].insert(key, std::move(det));
}

RunMetrics Engine::run(std::istream& input, const RunCallbacks& callbacks) {
  const auto& cfg = config_;
  RunMetrics m;
  m.interval = cfg.regulator.interval;

  std::unordered_map<std::uint64_t, Label> labels;
  if (!cfg.label_file.empty()) {
    std::ifstream lf(cfg.label_file);
    if (!lf) throw ConfigError("cannot open label file " + cfg.label_file);
    labels = load_label_file(lf, cfg.delimiter);
  }
  ReaderOptions ropts;
  ropts.delimiter = cfg.delimiter;
  ropts.reorder_tolerance = cfg.reorder_tolerance;
  ropts.date_offset = cfg.date_offset;
  ropts.labels = cfg.label_file.empty() ? nullptr : &labels;
  FlowReader reader(input, ropts);

  std::optional<ThresholdPolicy> policy;
  const PolicyKind kind = cfg.regulator.kind;
  const double dt = cfg.regulator.interval;

  auto interval_index = [&](double t) {
    return static_cast<std::size_t>(std::floor((t - *m.stream_start) / dt));
  };
  auto ensure_interval = [&](std::size_t idx) {
    while (m.intervals.size() <= idx) {
      IntervalMetrics iv;
      iv.start = *m.stream_start + dt * static_cast<double>(m.intervals.size());
      m.intervals.push_back(iv);
    }
  };
  // Label totals are counted in the reader stage; alerted counts at delivery.
  auto deliver = [&](const ScoreRecord& s) {
    if (callbacks.on_score) callbacks.on_score(s);
    if (!s.alerted) return;
    if (s.label == Label::Attack) ++m.confusion.alerted_positives;
    if (s.label == Label::Benign) ++m.confusion.alerted_negatives;
    ++m.alerts_total;
    m.intervals[interval_index(s.time)].alerts++;
    if (callbacks.on_alert) callbacks.on_alert(make_alert(s, kind));
  };

  const std::size_t workers = shards_.size();
  std::vector<std::unique_ptr<BoundedQueue<std::vector<WorkItem>>>> queues;
  std::vector<std::vector<WorkItem>> pending(workers);
  std::vector<std::vector<ScoreRecord>> results(workers);
  std::vector<std::exception_ptr> failures(workers);
  std::vector<std::thread> threads;
  if (workers > 1) {
    for (std::size_t w = 0; w < workers; ++w) {
      queues.push_back(std::make_unique<BoundedQueue<std::vector<WorkItem>>>(cfg.queue_capacity));
    }
    const bool keep_all = static_cast<bool>(callbacks.on_score);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          while (auto batch = queues[w]->pop()) {
            for (const auto& item : *batch) {
              const PValue pv = shards_[w].score_then_update(item.obs);
              const bool alerted = classify(pv, item.beta) == Decision::Alert;
              if (alerted || keep_all) {
                results[w].push_back({item.seq, item.time, item.obs.key, item.obs.bin, pv.value(),
                                      item.beta, alerted, item.label});
              }
            }
          }
        } catch (...) {
          failures[w] = std::current_exception();
          queues[w]->abort();
        }
      });
    }
  }
  auto shutdown = [&] {
    for (auto& q : queues) q->close();
    for (auto& t : threads) t.join();
    threads.clear();
  };

  std::uint64_t seq = 0;
  try {
    while (auto flow = reader.next()) {
      ++m.flows;
      const double t = flow->time;
      if (!m.stream_start) {
        m.stream_start = t;
        policy = make_policy(cfg.regulator, t);
      }
      m.stream_end = t;
      const std::size_t idx = interval_index(t);
      ensure_interval(idx);
      for (const auto& obs : route(*flow, cfg.internal)) {
        double beta = policy->admit(t);
        if (obs.key.feature == Feature::Port && cfg.regulator.port_beta_override) {
          beta = *cfg.regulator.port_beta_override;
        } else if (obs.key.feature == Feature::Pcr && cfg.regulator.pcr_beta_override) {
          beta = *cfg.regulator.pcr_beta_override;
        }
        auto& iv = m.intervals[idx];
        ++iv.scores;
        iv.last_beta = beta;
        ++m.scores_total;
        m.confusion.add(false, flow->label);

        if (workers == 1) {
          const PValue pv = shards_[0].score_then_update(obs);
          deliver({seq, t, obs.key, obs.bin, pv.value(), beta,
                   classify(pv, beta) == Decision::Alert, flow->label});
        } else {
          const std::size_t w = shard_of(obs.key);
          pending[w].push_back({seq, t, obs, beta, flow->label});
          if (pending[w].size() >= kBatchSize) {
            queues[w]->push(std::move(pending[w]));
            pending[w] = {};
            pending[w].reserve(kBatchSize);
          }
        }
        ++seq;
      }
    }
  } catch (...) {
    for (auto& q : queues) q->abort();
    for (auto& t : threads) t.join();
    throw;
  }

  if (workers > 1) {
    for (std::size_t w = 0; w < workers; ++w) {
      if (!pending[w].empty()) queues[w]->push(std::move(pending[w]));
    }
    shutdown();
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
    std::vector<ScoreRecord> merged;
    for (auto& r : results) merged.insert(merged.end(), r.begin(), r.end());
    std::sort(merged.begin(), merged.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) { return a.seq < b.seq; });
    for (const auto& s : merged) deliver(s);
  }

  m.detectors = 0;
  for (const auto& s : shards_) m.detectors += s.size();
  for (auto& iv : m.intervals) iv.rate = static_cast<double>(iv.scores) / dt;
  m.alerts_per_interval.reserve(m.intervals.size());
  for (const auto& iv : m.intervals) m.alerts_per_interval.push_back(iv.alerts);
  m.accuracy = compute_metrics(m.confusion);
  if (m.accuracy.warning) m.warnings.push_back(*m.accuracy.warning);
  m.ingest = reader.stats();
  for (const auto& w : reader.warnings()) m.warnings.push_back(w);
  return m;
}

}  // namespace pvalert
