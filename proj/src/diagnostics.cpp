#include "pvalert/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "pvalert/error.hpp"
#include "pvalert/text.hpp"

namespace pvalert {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::ConsistentFit:
      return "ConsistentFit";
    case Verdict::TailsTooThick:
      return "TailsTooThick";
    case Verdict::TailsTooThin:
      return "TailsTooThin";
    case Verdict::Inconclusive:
      return "Inconclusive";
  }
  return "?";
}

std::optional<double> FitnessReport::ratio(std::size_t i) const {
  if (expected.at(i) <= 0.0) return std::nullopt;
  return static_cast<double>(actual[i]) / expected[i];
}

std::optional<std::size_t> FitnessReport::find(double beta) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::fabs(thresholds[i] - beta) <= 1e-12 * std::max(1.0, beta)) return i;
  }
  return std::nullopt;
}

FitnessReport expected_vs_actual(std::span<const double> pvalues, std::span<const double> thresholds,
                                 bool equality_assumed, const DiagnosticOptions& options) {
  if (pvalues.empty()) throw InputError("no p-values to diagnose");
  if (thresholds.empty()) throw ConfigError("empty threshold grid");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0)) {
      throw ConfigError("grid thresholds must lie in (0, 1]");
    }
    if (i > 0 && thresholds[i] < thresholds[i - 1]) throw ConfigError("grid must be sorted");
  }
  if (!(options.thick_factor > 1.0)) throw ConfigError("diag.thick_factor must exceed 1");

  std::vector<double> sorted(pvalues.begin(), pvalues.end());
  for (double p : sorted) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("p-value outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end());

  FitnessReport report;
  report.n = sorted.size();
  report.equality_assumed = equality_assumed;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  const auto n = static_cast<double>(report.n);
  for (double beta : thresholds) {
    report.expected.push_back(beta * n);
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), beta);
    report.actual.push_back(static_cast<std::uint64_t>(it - sorted.begin()));
  }

  std::vector<double> ratios;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (report.expected[i] >= options.min_expected) {
      ratios.push_back(static_cast<double>(report.actual[i]) / report.expected[i]);
    }
  }
  const double f = options.thick_factor;
  if (ratios.empty()) {
    report.verdict = Verdict::Inconclusive;
    report.annotation = "no grid point has enough expected alerts";
    return report;
  }

  const std::size_t half = (ratios.size() + 1) / 2;
  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t i = 0; i < half; ++i) {
    if (ratios[i] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(ratios[i]);
    }
  }
  const double gm = any_zero ? 0.0 : std::exp(log_sum / static_cast<double>(half));
  report.small_beta_ratio = gm;

  const bool all_within =
      std::all_of(ratios.begin(), ratios.end(), [&](double r) {
        return r <= f && (!equality_assumed || r >= 1.0 / f);
      });

  if (gm > f) {
    report.verdict = Verdict::TailsTooThick;
  } else if (gm < 1.0 / f && equality_assumed) {
    report.verdict = Verdict::TailsTooThin;
  } else if (all_within) {
    report.verdict = Verdict::ConsistentFit;
  } else {
    report.verdict = Verdict::Inconclusive;
  }

  switch (report.verdict) {
    case Verdict::TailsTooThick:
      report.annotation =
          "alerts exceed the bound at small thresholds: the data has heavier tails than the "
          "model; refit the model before relying on the alert budget";
      break;
    case Verdict::TailsTooThin:
      report.annotation =
          "alerts fall short of the expected count: the model's tails are heavier than the "
          "data's; refit the model before relying on the alert budget";
      break;
    case Verdict::ConsistentFit:
      report.annotation = equality_assumed ? "alert counts track the expected curve"
                                           : "alert counts respect the bound";
      break;
    case Verdict::Inconclusive:
      report.annotation = "mixed deviations from the expected curve";
      break;
  }
  return report;
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi <= 1.0 && lo <= hi) || count < 1) {
    throw ConfigError("log grid needs 0 < lo <= hi <= 1 and count >= 1");
  }
  std::vector<double> grid;
  if (count == 1) {
    grid.push_back(lo);
  } else {
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(count - 1);
      grid.push_back(std::pow(10.0, a + (b - a) * t));
    }
    grid.back() = hi;
    grid.front() = lo;
  }
  if (grid.back() < 1.0) grid.push_back(1.0);
  return grid;
}

std::vector<double> parse_grid(std::string_view spec) {
  if (spec.starts_with("log:")) {
    const auto parts = split(spec.substr(4), ':');
    if (parts.size() != 3) throw ConfigError("grid must look like log:lo:hi:count");
    const auto lo = parse_double(parts[0]);
    const auto hi = parse_double(parts[1]);
    const auto count = parse_uint(parts[2]);
    if (!lo || !hi || !count) throw ConfigError("malformed log grid: " + std::string(spec));
    return log_grid(*lo, *hi, static_cast<std::size_t>(*count));
  }
  if (spec.starts_with("list:")) {
    std::vector<double> grid;
    for (auto item : split(spec.substr(5), ',')) {
      const auto v = parse_double(trim(item));
      if (!v || !(*v > 0.0 && *v <= 1.0)) {
        throw ConfigError("malformed grid value: " + std::string(item));
      }
      grid.push_back(*v);
    }
    if (grid.empty()) throw ConfigError("empty grid list");
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
  }
  throw ConfigError("unknown grid spec: " + std::string(spec));
}

bool equality_eligible(ModelFamily family) { return family != ModelFamily::Discrete; }

std::vector<double> attained_levels(const DiscreteModel& model) {
  std::vector<double> levels;
  levels.reserve(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) levels.push_back(pvalue_discrete(model, i).value());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

double expected_alert_fraction(const DiscreteModel& model, double beta) {
  std::vector<double> terms;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (pvalue_discrete(model, i).value() <= beta) terms.push_back(model[i]);
  }
  return rounded_sum(terms);
}

void write_report_table(std::ostream& out, const FitnessReport& report) {
  out << std::left << std::setw(14) << "beta" << std::setw(14) << "expected" << std::setw(10)
      << "actual" << "ratio\n";
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    out << std::setw(14) << format_double(report.thresholds[i]) << std::setw(14)
        << format_fixed(report.expected[i], 3) << std::setw(10) << report.actual[i];
    if (auto r = report.ratio(i)) {
      out << format_fixed(*r, 4);
    } else {
      out << "-";
    }
    out << '\n';
  }
  out << "n=" << report.n << " equality=" << (report.equality_assumed ? "yes" : "no")
      << " verdict=" << to_string(report.verdict) << '\n';
  if (report.small_beta_ratio) {
    out << "small_beta_ratio=" << format_fixed(*report.small_beta_ratio, 4) << '\n';
  }
  out << "note: " << report.annotation << '\n';
}

void write_report_csv(std::ostream& out, const FitnessReport& report) {
  out << "beta,expected,actual,ratio\n";
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    out << format_double(report.thresholds[i]) << ',' << format_double(report.expected[i]) << ','
        << report.actual[i] << ',';
    if (auto r = report.ratio(i)) out << format_double(*r);
    out << '\n';
  }
}

}  // namespace pvalert
