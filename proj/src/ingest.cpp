#include "pvalert/ingest.hpp"

#include <cmath>
#include <istream>
#include <limits>

#include "pvalert/error.hpp"
#include "pvalert/text.hpp"

namespace pvalert {

namespace {

double parse_time(std::string_view text, double date_offset) {
  if (text.find(':') == std::string_view::npos) {
    const auto v = parse_double(text);
    if (!v || !std::isfinite(*v)) throw InputError("bad timestamp '" + std::string(text) + "'");
    return *v;
  }
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw InputError("bad clock time '" + std::string(text) + "'");
  const auto h = parse_uint(parts[0]);
  const auto m = parse_uint(parts[1]);
  const auto s = parse_double(parts[2]);
  if (!h || !m || !s || *m >= 60 || !(*s >= 0.0 && *s < 61.0)) {
    throw InputError("bad clock time '" + std::string(text) + "'");
  }
  return date_offset + static_cast<double>(*h) * 3600.0 + static_cast<double>(*m) * 60.0 + *s;
}

std::uint16_t parse_port(std::string_view text) {
  const auto v = parse_uint(text);
  if (!v || *v > 65535) throw InputError("bad port '" + std::string(text) + "'");
  return static_cast<std::uint16_t>(*v);
}

std::uint64_t parse_bytes(std::string_view text) {
  const auto v = parse_uint(text);
  if (!v) throw InputError("bad byte count '" + std::string(text) + "'");
  return *v;
}

IpAddress parse_ip(std::string_view text) {
  const auto v = IpAddress::parse(text);
  if (!v) throw InputError("bad address '" + std::string(text) + "'");
  return *v;
}

// Parses a split row. Sets *mismatch when a totbytes column disagrees with
// src + dst; the record then carries the recomputed total.
FlowRecord parse_fields(const std::vector<std::string_view>& f, const FlowSchema& s,
                        bool* mismatch) {
  if (f.size() < s.columns) {
    throw InputError("expected " + std::to_string(s.columns) + " fields, got " +
                     std::to_string(f.size()));
  }
  FlowRecord r;
  r.time = parse_time(trim(f[s.time]), s.date_offset);
  r.protocol = std::string(trim(f[s.proto]));
  if (r.protocol.empty()) throw InputError("empty protocol");
  r.src_ip = parse_ip(trim(f[s.srcip]));
  r.src_port = parse_port(trim(f[s.srcport]));
  r.dst_ip = parse_ip(trim(f[s.dstip]));
  r.dst_port = parse_port(trim(f[s.dstport]));
  r.src_bytes = parse_bytes(trim(f[s.srcbytes]));
  r.dst_bytes = parse_bytes(trim(f[s.dstbytes]));
  if (r.src_bytes > std::numeric_limits<std::uint64_t>::max() - r.dst_bytes) {
    throw InputError("byte counts overflow");
  }
  r.tot_bytes = r.src_bytes + r.dst_bytes;
  if (s.totbytes != FlowSchema::kAbsent) {
    const auto tot = parse_bytes(trim(f[s.totbytes]));
    if (mismatch) *mismatch = tot != r.tot_bytes;
  }
  if (s.label != FlowSchema::kAbsent) {
    const auto text = trim(f[s.label]);
    if (!text.empty()) {
      r.label = parse_label(text);
      if (!r.label) throw InputError("bad label '" + std::string(text) + "'");
    }
  }
  return r;
}

}  // namespace

InternalPredicate::InternalPredicate(std::vector<Cidr> prefixes) : prefixes_(std::move(prefixes)) {
  if (prefixes_.empty()) throw ConfigError("internal address space must not be empty");
}

InternalPredicate InternalPredicate::parse(std::string_view list) {
  std::vector<Cidr> prefixes;
  for (auto item : split(list, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    auto c = Cidr::parse(item);
    if (!c) throw ConfigError("bad CIDR block '" + std::string(item) + "'");
    prefixes.push_back(*c);
  }
  return InternalPredicate(std::move(prefixes));
}

bool InternalPredicate::contains(const IpAddress& addr) const {
  for (const auto& p : prefixes_) {
    if (p.contains(addr)) return true;
  }
  return false;
}

FlowSchema FlowSchema::standard(char delimiter, bool with_label) {
  FlowSchema s;
  s.delimiter = delimiter;
  if (with_label) {
    s.label = 9;
    s.columns = 10;
  }
  return s;
}

FlowSchema FlowSchema::from_header(std::string_view header, char delimiter) {
  FlowSchema s;
  s.delimiter = delimiter;
  s.time = s.proto = s.srcip = s.srcport = s.dstip = s.dstport = s.srcbytes = s.dstbytes =
      s.totbytes = s.label = kAbsent;
  const auto names = split(header, delimiter);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string name = to_lower(trim(names[i]));
    std::size_t* slot = nullptr;
    if (name == "time") slot = &s.time;
    else if (name == "proto") slot = &s.proto;
    else if (name == "srcip") slot = &s.srcip;
    else if (name == "srcport") slot = &s.srcport;
    else if (name == "dstip") slot = &s.dstip;
    else if (name == "dstport") slot = &s.dstport;
    else if (name == "srcbytes") slot = &s.srcbytes;
    else if (name == "dstbytes") slot = &s.dstbytes;
    else if (name == "totbytes") slot = &s.totbytes;
    else if (name == "label") slot = &s.label;
    if (slot == nullptr) continue;  // extra columns are ignored
    if (*slot != kAbsent) throw ConfigError("duplicate column '" + name + "' in header");
    *slot = i;
  }
  const std::pair<const char*, std::size_t> required[] = {
      {"time", s.time},         {"proto", s.proto},       {"srcip", s.srcip},
      {"srcport", s.srcport},   {"dstip", s.dstip},       {"dstport", s.dstport},
      {"srcbytes", s.srcbytes}, {"dstbytes", s.dstbytes}};
  for (const auto& [name, pos] : required) {
    if (pos == kAbsent) throw ConfigError(std::string("flow header lacks column '") + name + "'");
  }
  s.columns = 0;
  for (std::size_t pos : {s.time, s.proto, s.srcip, s.srcport, s.dstip, s.dstport, s.srcbytes,
                          s.dstbytes, s.totbytes, s.label}) {
    if (pos != kAbsent) s.columns = std::max(s.columns, pos + 1);
  }
  return s;
}

std::string FlowSchema::header() const {
  std::vector<std::string> cols(columns);
  const std::pair<const char*, std::size_t> named[] = {
      {"time", time},       {"proto", proto},         {"srcip", srcip},
      {"srcport", srcport}, {"dstip", dstip},         {"dstport", dstport},
      {"srcbytes", srcbytes}, {"dstbytes", dstbytes}, {"totbytes", totbytes},
      {"label", label}};
  for (const auto& [name, pos] : named) {
    if (pos != kAbsent) cols[pos] = name;
  }
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += delimiter;
    out += cols[i];
  }
  return out;
}

FlowRecord parse_flow(std::string_view line, const FlowSchema& schema) {
  return parse_fields(split(line, schema.delimiter), schema, nullptr);
}

std::string serialize_flow(const FlowRecord& flow, const FlowSchema& schema) {
  std::vector<std::string> cols(schema.columns);
  cols[schema.time] = format_double(flow.time);
  cols[schema.proto] = flow.protocol;
  cols[schema.srcip] = flow.src_ip.to_string();
  cols[schema.srcport] = std::to_string(flow.src_port);
  cols[schema.dstip] = flow.dst_ip.to_string();
  cols[schema.dstport] = std::to_string(flow.dst_port);
  cols[schema.srcbytes] = std::to_string(flow.src_bytes);
  cols[schema.dstbytes] = std::to_string(flow.dst_bytes);
  if (schema.totbytes != FlowSchema::kAbsent) cols[schema.totbytes] = std::to_string(flow.tot_bytes);
  if (schema.label != FlowSchema::kAbsent && flow.label) {
    cols[schema.label] = std::string(to_string(*flow.label));
  }
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += schema.delimiter;
    out += cols[i];
  }
  return out;
}

std::string_view to_string(Label label) { return label == Label::Attack ? "attack" : "benign"; }

std::optional<Label> parse_label(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "attack" || t == "1" || t == "malicious") return Label::Attack;
  if (t == "benign" || t == "0" || t == "normal") return Label::Benign;
  return std::nullopt;
}

std::unordered_map<std::uint64_t, Label> load_label_file(std::istream& in, char delimiter) {
  std::unordered_map<std::uint64_t, Label> labels;
  std::string line;
  std::uint64_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto parts = split(t, delimiter);
    const auto line_no = parts.size() == 2 ? parse_uint(trim(parts[0])) : std::nullopt;
    const auto label = parts.size() == 2 ? parse_label(parts[1]) : std::nullopt;
    if (!line_no || !label) {
      throw InputError("label file row " + std::to_string(row) + " is malformed");
    }
    labels[*line_no] = *label;
  }
  return labels;
}

FlowReader::FlowReader(std::istream& in, ReaderOptions options)
    : in_(in), options_(options) {
  if (!(options_.reorder_tolerance >= 0.0)) {
    throw ConfigError("ingest.reorder_tolerance must be >= 0");
  }
  while (std::getline(in_, line_)) {
    ++stats_.lines;
    const auto t = trim(line_);
    if (t.empty() || t.front() == '#') {
      ++stats_.skipped;
      continue;
    }
    schema_ = FlowSchema::from_header(t, options_.delimiter);
    schema_.date_offset = options_.date_offset;
    return;
  }
  throw ConfigError("flow input has no header row");
}

void FlowReader::warn(std::string message) {
  if (warnings_.size() < options_.max_warnings) warnings_.push_back(std::move(message));
}

std::optional<FlowRecord> FlowReader::read_record() {
  std::vector<std::string_view> fields;
  while (std::getline(in_, line_)) {
    ++stats_.lines;
    const auto t = trim(line_);
    if (t.empty() || t.front() == '#') {
      ++stats_.skipped;
      continue;
    }
    fields = split(t, schema_.delimiter);
    bool mismatch = false;
    FlowRecord r;
    try {
      r = parse_fields(fields, schema_, &mismatch);
    } catch (const InputError& e) {
      ++stats_.parse_errors;
      warn("line " + std::to_string(stats_.lines) + ": " + e.what());
      continue;
    }
    if (mismatch) {
      ++stats_.tot_bytes_mismatches;
      warn("line " + std::to_string(stats_.lines) + ": totbytes != srcbytes + dstbytes, recomputed");
    }
    if (options_.labels) {
      if (auto it = options_.labels->find(stats_.lines); it != options_.labels->end()) {
        r.label = it->second;
      }
    }
    return r;
  }
  eof_ = true;
  return std::nullopt;
}

std::optional<FlowRecord> FlowReader::next() {
  while (!eof_) {
    // Release whatever the tolerance window has closed on.
    if (!buffer_.empty() && newest_ &&
        buffer_.top().flow.time <= *newest_ - options_.reorder_tolerance) {
      break;
    }
    auto r = read_record();
    if (!r) break;
    if (newest_ && r->time < *newest_ - options_.reorder_tolerance) {
      ++stats_.ordering_errors;
      warn("line " + std::to_string(stats_.lines) + ": timestamp " + format_double(r->time) +
           " is out of order");
      continue;
    }
    newest_ = newest_ ? std::max(*newest_, r->time) : r->time;
    buffer_.push(Pending{std::move(*r), seq_++});
  }
  if (buffer_.empty()) return std::nullopt;
  FlowRecord out = buffer_.top().flow;
  buffer_.pop();
  ++stats_.records;
  return out;
}

RoutedObservations route(const FlowRecord& flow, const InternalPredicate& internal) {
  RoutedObservations out;
  const bool has_pcr = flow.src_bytes + flow.dst_bytes > 0;
  const std::optional<std::size_t> pcr_observation =
      has_pcr ? std::optional<std::size_t>(pcr_bin(pcr(flow.src_bytes, flow.dst_bytes)))
              : std::nullopt;

  auto emit = [&](const IpAddress& entity, Direction direction) {
    if (pcr_observation) out.push({{entity, Feature::Pcr}, *pcr_observation});
    if (auto bin = port_bin(flow, direction)) out.push({{entity, Feature::Port}, *bin});
  };
  if (internal.contains(flow.src_ip)) emit(flow.src_ip, Direction::Outbound);
  if (internal.contains(flow.dst_ip)) emit(flow.dst_ip, Direction::Inbound);
  return out;
}

}  // namespace pvalert
