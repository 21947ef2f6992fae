#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pvalert/features.hpp"
#include "pvalert/flow.hpp"
#include "pvalert/ip.hpp"

namespace pvalert {

/// Address space whose hosts get detectors.
class InternalPredicate {
 public:
  /// Non-empty, otherwise ConfigError.
  explicit InternalPredicate(std::vector<Cidr> prefixes);
  /// Comma-separated CIDR list.
  static InternalPredicate parse(std::string_view list);

  [[nodiscard]] bool contains(const IpAddress& addr) const;
  [[nodiscard]] const std::vector<Cidr>& prefixes() const { return prefixes_; }

 private:
  std::vector<Cidr> prefixes_;
};

/// Column positions of the flow fields in a delimited file.
struct FlowSchema {
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  char delimiter = ',';
  /// Added to HH:MM:SS[.fff] times; epoch-second times are taken as is.
  double date_offset = 0.0;
  std::size_t time = 0, proto = 1, srcip = 2, srcport = 3, dstip = 4, dstport = 5, srcbytes = 6,
              dstbytes = 7, totbytes = 8, label = kAbsent;
  std::size_t columns = 9;

  /// Standard column order: time,proto,srcip,srcport,dstip,dstport,srcbytes,
  /// dstbytes,totbytes[,label].
  static FlowSchema standard(char delimiter = ',', bool with_label = false);

  /// Column map from a header row (names case-insensitive; totbytes and label
  /// optional). ConfigError if a required column is missing.
  static FlowSchema from_header(std::string_view header, char delimiter = ',');

  [[nodiscard]] std::string header() const;
};

/// Parses one data row. InputError on a missing or garbled field.
FlowRecord parse_flow(std::string_view line, const FlowSchema& schema);

/// Writes a row that parse_flow reads back to the same record. Times are
/// written as seconds.
std::string serialize_flow(const FlowRecord& flow, const FlowSchema& schema);

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

/// Loads "line_number<delim>label" rows; line numbers count the header as 1.
std::unordered_map<std::uint64_t, Label> load_label_file(std::istream& in, char delimiter = ',');

struct IngestStats {
  std::uint64_t lines = 0;
  std::uint64_t records = 0;
  std::uint64_t skipped = 0;  // blank and comment lines
  std::uint64_t parse_errors = 0;
  std::uint64_t ordering_errors = 0;
  std::uint64_t tot_bytes_mismatches = 0;
};

struct ReaderOptions {
  char delimiter = ',';
  double reorder_tolerance = 0.0;  // seconds
  double date_offset = 0.0;
  const std::unordered_map<std::uint64_t, Label>* labels = nullptr;
  std::size_t max_warnings = 20;
};

/// Sequential reader over a delimited flow file with a header row. Bad lines
/// are counted and skipped; the stream never aborts on them. Records come out
/// in time order: a record more than `reorder_tolerance` seconds older than
/// the newest one seen is an ordering error and is dropped.
class FlowReader {
 public:
  /// Reads the header immediately; ConfigError if it is missing or invalid.
  FlowReader(std::istream& in, ReaderOptions options);

  std::optional<FlowRecord> next();

  [[nodiscard]] const FlowSchema& schema() const { return schema_; }
  [[nodiscard]] const IngestStats& stats() const { return stats_; }
  [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  struct Pending {
    FlowRecord flow;
    std::uint64_t seq;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.flow.time > b.flow.time || (a.flow.time == b.flow.time && a.seq > b.seq);
    }
  };

  std::optional<FlowRecord> read_record();
  void warn(std::string message);

  std::istream& in_;
  ReaderOptions options_;
  FlowSchema schema_;
  IngestStats stats_;
  std::vector<std::string> warnings_;
  std::string line_;
  std::optional<double> newest_;
  bool eof_ = false;
  std::uint64_t seq_ = 0;
  std::priority_queue<Pending, std::vector<Pending>, Later> buffer_;
};

struct Observation {
  DetectorKey key;
  std::size_t bin = 0;
};

/// Up to four observations: (pcr, port) for an internal source, then the same
/// for an internal destination.
class RoutedObservations {
 public:
  void push(Observation o) { items_[count_++] = std::move(o); }
  [[nodiscard]] std::size_t size() const { return count_; }
  [[nodiscard]] const Observation* begin() const { return items_.data(); }
  [[nodiscard]] const Observation* end() const { return items_.data() + count_; }
  const Observation& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::array<Observation, 4> items_{};
  std::size_t count_ = 0;
};

/// Feature observations for each internal endpoint. The source of the flow
/// sees it as outbound, the destination as inbound; both use the flow's
/// destination port and its producer-consumer ratio. Flows with no bytes give
/// no PCR observation.
RoutedObservations route(const FlowRecord& flow, const InternalPredicate& internal);

}  // namespace pvalert
