// pvalert command-line front end: run, diagnose, synth, plot.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pvalert/config.hpp"
#include "pvalert/diagnostics.hpp"
#include "pvalert/engine.hpp"
#include "pvalert/error.hpp"
#include "pvalert/snapshot.hpp"
#include "pvalert/synth.hpp"
#include "pvalert/text.hpp"

namespace {

using namespace pvalert;

constexpr int kConfigExit = 1;
constexpr int kInputExit = 2;

// "-" means the standard stream.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw ConfigError("cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

class Input {
 public:
  explicit Input(const std::string& path) {
    if (path == "-") return;
    file_ = std::make_unique<std::ifstream>(path);
    if (!*file_) throw InputError("cannot open " + path);
  }
  std::istream& stream() { return file_ ? *file_ : std::cin; }

 private:
  std::unique_ptr<std::ifstream> file_;
};

struct RunArgs {
  std::string input = "-";
  std::string config;
  std::string policy;
  std::optional<double> beta;
  std::optional<double> rate_bound;
  std::optional<double> interval;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::string alerts_out;
  std::string metrics_out;
  std::string snapshot_in;
  std::string snapshot_out;
};

int cmd_run(const RunArgs& a) {
  Config cfg = Config::load(a.config);
  if (!a.policy.empty()) cfg.set("regulator.policy", a.policy);
  if (a.beta) cfg.set("regulator.beta", format_double(*a.beta));
  if (a.rate_bound) cfg.set("regulator.rate_bound", format_double(*a.rate_bound));
  if (a.interval) cfg.set("regulator.interval", format_double(*a.interval));
  if (a.workers) cfg.set("engine.workers", std::to_string(*a.workers));
  if (a.seed) cfg.set("engine.seed", std::to_string(*a.seed));
  Engine engine(EngineConfig::from_config(cfg));

  if (!a.snapshot_in.empty()) {
    Input snap(a.snapshot_in);
    engine.restore_detectors(read_multinomials(snap.stream()));
  }
  Input in(a.input);
  Output alerts(a.alerts_out);
  RunCallbacks cb;
  cb.on_alert = [&](const AlertRecord& r) { alerts.stream() << format_alert(r) << '\n'; };
  const RunMetrics m = engine.run(in.stream(), cb);
  alerts.stream().flush();

  if (!a.metrics_out.empty()) {
    Output metrics(a.metrics_out);
    write_metrics(metrics.stream(), m);
  }
  if (!a.snapshot_out.empty()) {
    Output snap(a.snapshot_out);
    write_multinomials(snap.stream(), engine.detector_entries());
  }
  std::cerr << "flows=" << m.flows << " scores=" << m.scores_total << " alerts=" << m.alerts_total
            << " detectors=" << m.detectors << " parse_errors=" << m.ingest.parse_errors
            << " ordering_errors=" << m.ingest.ordering_errors << '\n';
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

std::vector<double> read_pvalues(std::istream& in) {
  std::vector<double> out;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto v = parse_double(t);
    if (!v || !(*v >= 0.0 && *v <= 1.0)) {
      throw InputError("line " + std::to_string(line_no) + ": not a p-value: " + std::string(t));
    }
    out.push_back(*v);
  }
  return out;
}

struct DiagnoseArgs {
  std::string pvalues;
  std::string grid;
  std::string equality = "no";
  std::string report;
  std::string config;
  bool csv = false;
};

int cmd_diagnose(const DiagnoseArgs& a) {
  Config cfg = a.config.empty() ? Config{} : Config::load(a.config);
  const auto opts = diagnostic_options_from_config(cfg);
  const std::string grid_spec =
      !a.grid.empty() ? a.grid : cfg.get_string("diag.grid", "log:1e-4:1e-1:20");
  const auto grid = parse_grid(grid_spec);
  if (a.equality != "yes" && a.equality != "no") throw ConfigError("--equality takes yes or no");
  Input in(a.pvalues);
  const auto pvalues = read_pvalues(in.stream());
  const auto report = expected_vs_actual(pvalues, grid, a.equality == "yes", opts);
  Output out(a.report);
  if (a.csv) {
    write_report_csv(out.stream(), report);
  } else {
    write_report_table(out.stream(), report);
  }
  if (!a.report.empty()) std::cout << "verdict=" << to_string(report.verdict) << '\n';
  return 0;
}

struct SynthFlowsArgs {
  std::string spec;
  std::string out = "-";
};

int cmd_synth_flows(const SynthFlowsArgs& a) {
  const auto spec = StreamSpec::load(a.spec);
  Output out(a.out);
  const auto summary = generate_flow_stream(spec, out.stream());
  std::cerr << "flows=" << summary.flows << " attack_flows=" << summary.attack_flows << '\n';
  return 0;
}

struct SynthPvaluesArgs {
  std::string dist = "normal";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out = "-";
  long dim = 1;
  std::string config;
};

int cmd_synth_pvalues(const SynthPvaluesArgs& a) {
  Config cfg = a.config.empty() ? Config{} : Config::load(a.config);
  if (a.dim < 1) throw ConfigError("--dim must be >= 1");
  const auto opts = gaussian_options_from_config(cfg, a.seed);
  const auto pv = fitted_gaussian_pvalues(SampleDistribution::parse(a.dist), a.dim, a.n, a.seed, opts);
  Output out(a.out);
  out.stream() << "# generator=" << kGeneratorName << " seed=" << a.seed << " dist=" << a.dist
               << " dim=" << a.dim << " warmup=" << opts.warmup << '\n';
  for (double p : pv) out.stream() << format_double(p) << '\n';
  return 0;
}

struct PlotArgs {
  std::string alerts;
  double interval = 60.0;
  std::optional<double> start;
  std::string out = "-";
};

void write_svg(std::ostream& out, const std::vector<std::uint64_t>& hist, double start, double dt) {
  const double width = 900, height = 320, margin = 40;
  const auto peak = hist.empty() ? 1 : std::max<std::uint64_t>(1, *std::max_element(hist.begin(), hist.end()));
  const double bar = hist.empty() ? 0.0 : (width - 2 * margin) / static_cast<double>(hist.size());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double h = (height - 2 * margin) * static_cast<double>(hist[i]) / static_cast<double>(peak);
    out << "<rect x=\"" << format_fixed(margin + bar * static_cast<double>(i), 2) << "\" y=\""
        << format_fixed(height - margin - h, 2) << "\" width=\"" << format_fixed(std::max(bar, 0.5), 2)
        << "\" height=\"" << format_fixed(h, 2) << "\" fill=\"steelblue\"/>\n";
  }
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << margin << "\" y=\"" << margin / 2 << "\" font-size=\"12\">alerts per "
      << format_double(dt) << " s from t=" << format_double(start) << ", peak " << peak << "</text>\n"
      << "</svg>\n";
}

int cmd_plot(const PlotArgs& a) {
  if (!(a.interval > 0.0)) throw ConfigError("--interval must be positive");
  Input in(a.alerts);
  std::vector<double> times;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in.stream(), line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto alert = parse_alert(line);
    if (!alert) throw InputError("line " + std::to_string(line_no) + ": not an alert record");
    times.push_back(alert->time);
  }
  double start = 0.0;
  if (a.start) {
    start = *a.start;
  } else if (!times.empty()) {
    start = std::floor(*std::min_element(times.begin(), times.end()) / a.interval) * a.interval;
  }
  const auto hist = alerts_per_interval(times, a.interval, start);
  Output out(a.out);
  if (a.out.size() >= 4 && a.out.substr(a.out.size() - 4) == ".svg") {
    write_svg(out.stream(), hist, start, a.interval);
    return 0;
  }
  const auto peak = hist.empty() ? 0 : *std::max_element(hist.begin(), hist.end());
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const auto len = peak == 0 ? 0 : static_cast<std::size_t>(std::lround(60.0 * static_cast<double>(hist[i]) / static_cast<double>(peak)));
    out.stream() << format_double(start + a.interval * static_cast<double>(i)) << '\t' << hist[i] << '\t'
                 << std::string(len, '#') << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming p-value anomaly detection with alert-rate regulation"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Score a flow file and emit alerts");
  run_cmd->add_option("--input", run.input, "Flow file, or - for stdin")->capture_default_str();
  run_cmd->add_option("--config", run.config, "Config file")->required();
  run_cmd->add_option("--policy", run.policy, "fixed, adaptive or waittime");
  run_cmd->add_option("--beta", run.beta, "Fixed p-value threshold");
  run_cmd->add_option("--rate-bound", run.rate_bound, "Alert budget in alerts per minute");
  run_cmd->add_option("--interval", run.interval, "Rate-estimation interval in seconds");
  run_cmd->add_option("--workers", run.workers, "Detector shards");
  run_cmd->add_option("--seed", run.seed, "Seed for seeded components");
  run_cmd->add_option("--alerts-out", run.alerts_out, "Alert sink (default stdout)");
  run_cmd->add_option("--metrics-out", run.metrics_out, "Run metrics file");
  run_cmd->add_option("--snapshot-in", run.snapshot_in, "Restore detector state before the run");
  run_cmd->add_option("--snapshot-out", run.snapshot_out, "Save detector state after the run");

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Expected-vs-actual alert counts for p-values");
  diag_cmd->add_option("--pvalues", diag.pvalues, "One p-value per line")->required();
  diag_cmd->add_option("--grid", diag.grid, "log:lo:hi:count or list:b1,b2,...");
  diag_cmd->add_option("--equality", diag.equality, "yes if the model family attains equality")
      ->capture_default_str();
  diag_cmd->add_option("--report", diag.report, "Report file (default stdout)");
  diag_cmd->add_option("--config", diag.config, "Config file with diag.* keys");
  diag_cmd->add_flag("--csv", diag.csv, "Write CSV instead of a table");

  auto* synth_cmd = app.add_subcommand("synth", "Synthetic data");
  synth_cmd->require_subcommand(1);
  SynthFlowsArgs flows;
  auto* flows_cmd = synth_cmd->add_subcommand("flows", "Labeled flow stream from a stream spec");
  flows_cmd->add_option("--spec", flows.spec, "Stream spec file")->required();
  flows_cmd->add_option("--out", flows.out, "Output file, or - for stdout")->capture_default_str();
  SynthPvaluesArgs pvals;
  auto* pv_cmd = synth_cmd->add_subcommand("pvalues", "p-values of samples against a fitted Gaussian");
  pv_cmd->add_option("--dist", pvals.dist, "normal or student:<dof>")->capture_default_str();
  pv_cmd->add_option("--n", pvals.n, "Scored samples after warmup")->capture_default_str();
  pv_cmd->add_option("--seed", pvals.seed)->capture_default_str();
  pv_cmd->add_option("--dim", pvals.dim, "Dimension")->capture_default_str();
  pv_cmd->add_option("--out", pvals.out, "Output file, or - for stdout")->capture_default_str();
  pv_cmd->add_option("--config", pvals.config, "Config file with gaussian.* and mcd.* keys");

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Alerts-per-interval chart");
  plot_cmd->add_option("--alerts", plot.alerts, "Alert file")->required();
  plot_cmd->add_option("--interval", plot.interval, "Bucket width in seconds")->capture_default_str();
  plot_cmd->add_option("--start", plot.start, "First bucket start (default: first alert, floored)");
  plot_cmd->add_option("--out", plot.out, "Output; a .svg name gives SVG, otherwise text")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*diag_cmd) return cmd_diagnose(diag);
    if (*flows_cmd) return cmd_synth_flows(flows);
    if (*pv_cmd) return cmd_synth_pvalues(pvals);
    if (*plot_cmd) return cmd_plot(plot);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputExit;
  } catch (const IndexError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputExit;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kInputExit;
  }
  return 0;
}
