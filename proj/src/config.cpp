#include "pvalert/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "pvalert/error.hpp"
#include "pvalert/text.hpp"

namespace pvalert {

namespace {

constexpr std::array<std::string_view, 29> kKnownKeys = {
    "internal_cidrs",
    "regulator.policy",
    "regulator.beta",
    "regulator.max_alerts",
    "regulator.expected_events",
    "regulator.rate_bound",
    "regulator.interval",
    "regulator.warmup_beta",
    "regulator.window_intervals",
    "regulator.override.port.beta",
    "regulator.override.pcr.beta",
    "mcd.starts",
    "mcd.max_iter",
    "mcd.seed",
    "gaussian.ridge",
    "gaussian.refit_every",
    "gaussian.warmup",
    "gaussian.trim_fraction",
    "gaussian.history",
    "diag.thick_factor",
    "diag.min_expected",
    "diag.grid",
    "ingest.delimiter",
    "ingest.reorder_tolerance",
    "ingest.date_offset",
    "ingest.label_file",
    "engine.workers",
    "engine.seed",
    "engine.queue_capacity",
};

}  // namespace

bool Config::is_known_key(std::string_view key) {
  return std::find(kKnownKeys.begin(), kKnownKeys.end(), key) != kKnownKeys.end();
}

Config Config::parse(std::istream& in) {
  Config cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view t = line;
    if (const auto hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
    t = trim(t);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
  return cfg;
}

Config Config::parse_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in);
}

void Config::set(std::string key, std::string value) {
  if (!is_known_key(key)) throw ConfigError("unknown config key '" + key + "'");
  entries_[std::move(key)] = std::move(value);
}

bool Config::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> Config::get(std::string_view key) const {
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  auto v = get(key);
  return v ? *v : std::string(fallback);
}

double Config::get_double(std::string_view key, double fallback) const {
  auto v = get_optional_double(key);
  return v ? *v : fallback;
}

std::optional<double> Config::get_optional_double(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  auto d = parse_double(*v);
  if (!d) throw ConfigError("config key '" + std::string(key) + "' is not a number: " + *v);
  return d;
}

std::uint64_t Config::get_uint(std::string_view key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto u = parse_uint(*v);
  if (!u) throw ConfigError("config key '" + std::string(key) + "' is not a non-negative integer");
  return *u;
}

char parse_delimiter(std::string_view text) {
  if (text == "tab" || text == "\\t" || text == "\t") return '\t';
  if (text.size() == 1 && (text == "," || text == ";" || text == "|" || text == " ")) {
    return text.front();
  }
  throw ConfigError("unsupported delimiter '" + std::string(text) + "'");
}

}  // namespace pvalert
