#include "pvalert/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "pvalert/config.hpp"
#include "pvalert/error.hpp"
#include "pvalert/ingest.hpp"
#include "pvalert/text.hpp"

namespace pvalert {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

constexpr std::uint16_t kCommonPorts[] = {21,  22,  23,  25,  53,  80,  88,  110, 123, 135,
                                          139, 143, 389, 443, 445, 465, 587, 636, 993, 995};

struct EntityProfile {
  double outbound = 0.5;
  std::vector<std::uint16_t> ports;
  std::discrete_distribution<std::size_t> port_pick;
  std::discrete_distribution<std::size_t> pcr_pick;  // bins 0..8
};

double round_micro(double t) { return std::round(t * 1e6) / 1e6; }

// Total bytes split so that (src - dst) / (src + dst) falls inside the bin.
std::pair<std::uint64_t, std::uint64_t> bytes_for_pcr_bin(std::size_t bin, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint64_t> total_dist(200, 20000);
  std::uniform_real_distribution<double> within(0.1, 0.9);
  for (;;) {
    const auto total = total_dist(rng);
    const double v = -1.0 + 0.2 * (static_cast<double>(bin) + within(rng));
    const auto src = static_cast<std::uint64_t>(std::llround(static_cast<double>(total) * (1.0 + v) / 2.0));
    const auto dst = total - std::min(src, total);
    if (src + dst > 0 && pcr_bin(pcr(src, dst)) == bin) return {src, dst};
  }
}

IpAddress external_peer(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> host(1, 0x1fffe);
  return IpAddress::v4((198u << 24) | (18u << 16) | host(rng));
}

std::uint16_t ephemeral_port(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> p(1025, 65535);
  return static_cast<std::uint16_t>(p(rng));
}

}  // namespace

std::vector<std::size_t> sample_discrete(const DiscreteModel& model, std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed, 0);
  std::discrete_distribution<std::size_t> dist(model.probs().begin(), model.probs().end());
  std::vector<std::size_t> out(n);
  for (auto& x : out) x = dist(rng);
  return out;
}

std::vector<Eigen::VectorXd> sample_gaussian(const MultivariateGaussian& model, std::size_t n,
                                             std::uint64_t seed) {
  auto rng = make_rng(seed, 0);
  std::normal_distribution<double> z;
  const auto d = model.dim();
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  Eigen::VectorXd u(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) u(j) = z(rng);
    out.emplace_back(model.mean() + model.cholesky_lower() * u);
  }
  return out;
}

std::vector<Eigen::VectorXd> sample_student_t(double dof, Eigen::Index dim, std::size_t n,
                                              std::uint64_t seed) {
  if (!(dof > 0.0)) throw ConfigError("Student-t degrees of freedom must be positive");
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  auto rng = make_rng(seed, 0);
  std::normal_distribution<double> z;
  std::chi_squared_distribution<double> w(dof);
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(dim);
    for (Eigen::Index j = 0; j < dim; ++j) x(j) = z(rng);
    x /= std::sqrt(w(rng) / dof);
    out.push_back(std::move(x));
  }
  return out;
}

SampleDistribution SampleDistribution::parse(std::string_view text) {
  if (text == "normal") return {};
  constexpr std::string_view prefix = "student:";
  if (text.substr(0, prefix.size()) == prefix) {
    auto dof = parse_double(text.substr(prefix.size()));
    if (!dof || !(*dof > 0.0)) throw ConfigError("student degrees of freedom must be positive");
    return {Kind::StudentT, *dof};
  }
  throw ConfigError("distribution must be normal or student:<dof>");
}

std::vector<Eigen::VectorXd> sample(const SampleDistribution& dist, Eigen::Index dim, std::size_t n,
                                    std::uint64_t seed) {
  if (dist.kind == SampleDistribution::Kind::StudentT) return sample_student_t(dist.dof, dim, n, seed);
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  return sample_gaussian(MultivariateGaussian(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)),
                         n, seed);
}

std::vector<double> fitted_gaussian_pvalues(const SampleDistribution& dist, Eigen::Index dim,
                                            std::size_t n, std::uint64_t seed,
                                            const GaussianDetectorOptions& options) {
  StreamingGaussianDetector det(dim, options);
  std::vector<double> out;
  out.reserve(n);
  for (const auto& x : sample(dist, dim, options.warmup + n, seed)) {
    if (auto pv = det.step(x)) out.push_back(pv->value());
  }
  return out;
}

void StreamSpec::validate() const {
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (!(base_rate > 0.0)) throw ConfigError("base_rate must be positive");
  if (entities < 1) throw ConfigError("entities must be >= 1");
  if (entities > 0xffff) throw ConfigError("at most 65535 entities");
  if (profile == RateProfile::StepDouble && !(step_at >= 0.0 && step_at <= duration)) {
    throw ConfigError("step_at must lie within the stream");
  }
  if (burst) {
    if (!(burst->length > 0.0)) throw ConfigError("burst.length must be positive");
    if (!(burst->start >= 0.0 && burst->start + burst->length <= duration)) {
      throw ConfigError("burst must lie within the stream");
    }
    if (burst->entity >= entities) throw ConfigError("burst.entity out of range");
    if (burst->ports.empty()) throw ConfigError("burst.ports must not be empty");
    for (auto p : burst->ports) {
      if (p < 1 || p > kMaxPrivatePort) throw ConfigError("burst.ports must lie in 1..1024");
    }
  }
}

StreamSpec StreamSpec::parse(std::istream& in) {
  StreamSpec s;
  BurstSpec b;
  bool has_burst = false;
  std::string line;
  int line_no = 0;
  auto number = [&](std::string_view key, std::string_view v) {
    auto d = parse_double(v);
    if (!d) throw ConfigError("stream spec key '" + std::string(key) + "' is not a number");
    return *d;
  };
  auto count = [&](std::string_view key, std::string_view v) {
    auto u = parse_uint(v);
    if (!u) throw ConfigError("stream spec key '" + std::string(key) + "' is not a non-negative integer");
    return *u;
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view t = line;
    if (const auto hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
    t = trim(t);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("stream spec line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(t.substr(0, eq));
    const auto val = trim(t.substr(eq + 1));
    if (key == "seed") {
      s.seed = count(key, val);
    } else if (key == "duration") {
      s.duration = number(key, val);
    } else if (key == "entities") {
      s.entities = count(key, val);
    } else if (key == "base_rate") {
      s.base_rate = number(key, val);
    } else if (key == "rate_profile") {
      if (val == "constant") {
        s.profile = RateProfile::Constant;
      } else if (val == "step_double") {
        s.profile = RateProfile::StepDouble;
      } else {
        throw ConfigError("rate_profile must be constant or step_double");
      }
    } else if (key == "step_at") {
      s.step_at = number(key, val);
    } else if (key.substr(0, 6) == "burst.") {
      has_burst = true;
      const auto sub = key.substr(6);
      if (sub == "start") {
        b.start = number(key, val);
      } else if (sub == "length") {
        b.length = number(key, val);
      } else if (sub == "entity") {
        b.entity = count(key, val);
      } else if (sub == "flows") {
        b.flows = count(key, val);
      } else if (sub == "ports") {
        b.ports.clear();
        for (auto p : split(val, ',')) {
          const auto port = count(key, trim(p));
          if (port > 0xffff) throw ConfigError("burst.ports entry out of range");
          b.ports.push_back(static_cast<std::uint16_t>(port));
        }
      } else {
        throw ConfigError("unknown stream spec key '" + std::string(key) + "'");
      }
    } else {
      throw ConfigError("unknown stream spec key '" + std::string(key) + "'");
    }
  }
  if (has_burst) s.burst = b;
  s.validate();
  return s;
}

StreamSpec StreamSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open stream spec " + path);
  return parse(in);
}

IpAddress synth_entity(std::size_t index) {
  return IpAddress::v4((100u << 24) + static_cast<std::uint32_t>(index) + 1);
}

StreamSummary generate_flow_stream(const StreamSpec& spec, std::ostream& out) {
  spec.validate();
  auto profile_rng = make_rng(spec.seed, 1);
  auto flow_rng = make_rng(spec.seed, 2);
  auto burst_rng = make_rng(spec.seed, 3);

  std::vector<std::uint16_t> pool;
  for (auto p : kCommonPorts) {
    if (!spec.burst || std::find(spec.burst->ports.begin(), spec.burst->ports.end(), p) == spec.burst->ports.end()) {
      pool.push_back(p);
    }
  }
  std::vector<EntityProfile> profiles(spec.entities);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& prof : profiles) {
    prof.outbound = 0.2 + 0.6 * unit(profile_rng);
    std::shuffle(pool.begin(), pool.end(), profile_rng);
    const std::size_t m = std::min<std::size_t>(pool.size(), 2 + profile_rng() % 4);
    prof.ports.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::vector<double> w(m);
    for (auto& x : w) x = 0.2 + unit(profile_rng);
    prof.port_pick = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    const auto primary = static_cast<int>(profile_rng() % 9);
    std::vector<double> pw(9);
    for (int b = 0; b < 9; ++b) pw[b] = std::pow(0.35, std::abs(b - primary));
    prof.pcr_pick = std::discrete_distribution<std::size_t>(pw.begin(), pw.end());
  }
  std::vector<double> weights(spec.entities);
  for (std::size_t i = 0; i < spec.entities; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::size_t> pick_entity(weights.begin(), weights.end());

  std::vector<double> burst_times;
  if (spec.burst) {
    std::uniform_real_distribution<double> in_burst(spec.burst->start, spec.burst->start + spec.burst->length);
    for (std::size_t i = 0; i < spec.burst->flows; ++i) burst_times.push_back(round_micro(in_burst(burst_rng)));
    std::sort(burst_times.begin(), burst_times.end());
  }

  const FlowSchema schema = FlowSchema::standard(',', true);
  out << "# generator=" << kGeneratorName << " seed=" << spec.seed << '\n' << schema.header() << '\n';

  StreamSummary summary;
  auto write = [&](const FlowRecord& f) {
    if (summary.flows == 0) summary.first_time = f.time;
    summary.last_time = f.time;
    ++summary.flows;
    if (f.label == Label::Attack) ++summary.attack_flows;
    out << serialize_flow(f, schema) << '\n';
  };

  std::size_t next_burst = 0;
  auto flush_burst = [&](double until) {
    std::uniform_int_distribution<std::size_t> port(0, spec.burst ? spec.burst->ports.size() - 1 : 0);
    std::uniform_int_distribution<std::uint64_t> bytes(40, 1500);
    while (next_burst < burst_times.size() && burst_times[next_burst] <= until) {
      FlowRecord f;
      f.time = burst_times[next_burst++];
      f.protocol = "tcp";
      f.src_ip = synth_entity(spec.burst->entity);
      f.src_port = ephemeral_port(burst_rng);
      f.dst_ip = external_peer(burst_rng);
      f.dst_port = spec.burst->ports[port(burst_rng)];
      f.src_bytes = bytes(burst_rng);
      f.dst_bytes = 0;
      f.tot_bytes = f.src_bytes;
      f.label = Label::Attack;
      write(f);
    }
  };

  const bool step = spec.profile == RateProfile::StepDouble;
  double t = 0.0;
  for (;;) {
    const double rate = step && t >= spec.step_at ? 2.0 * spec.base_rate : spec.base_rate;
    const double next = t + std::exponential_distribution<double>(rate)(flow_rng);
    if (step && t < spec.step_at && next >= spec.step_at) {
      t = spec.step_at;
      continue;
    }
    if (next >= spec.duration) break;
    t = next;

    const std::size_t e = pick_entity(flow_rng);
    auto& prof = profiles[e];
    FlowRecord f;
    f.time = round_micro(t);
    f.protocol = unit(flow_rng) < 0.8 ? "tcp" : "udp";
    const bool outbound = unit(flow_rng) < prof.outbound;
    const IpAddress peer = external_peer(flow_rng);
    f.src_ip = outbound ? synth_entity(e) : peer;
    f.dst_ip = outbound ? peer : synth_entity(e);
    f.src_port = ephemeral_port(flow_rng);
    f.dst_port = prof.ports[prof.port_pick(flow_rng)];
    std::tie(f.src_bytes, f.dst_bytes) = bytes_for_pcr_bin(prof.pcr_pick(flow_rng), flow_rng);
    f.tot_bytes = f.src_bytes + f.dst_bytes;
    f.label = Label::Benign;
    flush_burst(f.time);
    write(f);
  }
  flush_burst(spec.duration);
  return summary;
}

}  // namespace pvalert
