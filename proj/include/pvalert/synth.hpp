#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pvalert/ip.hpp"
#include "pvalert/pvalue.hpp"
#include "pvalert/robust_gaussian.hpp"

namespace pvalert {

// All generators use std::mt19937_64 seeded with the given seed; output is a
// deterministic function of the arguments for a given standard library.
inline constexpr std::string_view kGeneratorName = "mt19937_64";

std::vector<std::size_t> sample_discrete(const DiscreteModel& model, std::size_t n, std::uint64_t seed);

std::vector<Eigen::VectorXd> sample_gaussian(const MultivariateGaussian& model, std::size_t n,
                                             std::uint64_t seed);

/// Multivariate Student-t with location 0 and identity scale: z / sqrt(w / dof)
/// with z ~ N(0, I_d) and w ~ chi-square(dof) shared across coordinates.
std::vector<Eigen::VectorXd> sample_student_t(double dof, Eigen::Index dim, std::size_t n,
                                              std::uint64_t seed);

struct SampleDistribution {
  enum class Kind { Normal, StudentT } kind = Kind::Normal;
  double dof = 0.0;

  /// "normal" or "student:<dof>".
  static SampleDistribution parse(std::string_view text);
};

std::vector<Eigen::VectorXd> sample(const SampleDistribution& dist, Eigen::Index dim, std::size_t n,
                                    std::uint64_t seed);

/// Streams `options.warmup + n` draws through a StreamingGaussianDetector and
/// returns the n p-values it produces after warmup.
std::vector<double> fitted_gaussian_pvalues(const SampleDistribution& dist, Eigen::Index dim,
                                            std::size_t n, std::uint64_t seed,
                                            const GaussianDetectorOptions& options);

enum class RateProfile { Constant, StepDouble };

struct BurstSpec {
  double start = 0.0;
  double length = 10.0;
  std::size_t entity = 0;
  std::size_t flows = 200;
  /// Destination ports of burst flows; none of them is in any entity's profile.
  std::vector<std::uint16_t> ports = {600, 601, 602, 603, 604, 605, 606, 607, 608, 609};
};

/// Flow stream parameters. Entities are internal hosts 100.0.0.1, 100.0.0.2,
/// ...; peers are external. Entity i is picked with weight 1/(i+1). Each
/// entity has a fixed mix of destination ports and producer-consumer ratios;
/// burst flows are one-way uploads (ratio +1) to ports outside every mix. Only
/// burst flows are labeled Attack.
struct StreamSpec {
  std::uint64_t seed = 0;
  double duration = 600.0;
  std::size_t entities = 100;
  double base_rate = 50.0;  // flows per second
  RateProfile profile = RateProfile::Constant;
  double step_at = 0.0;  // StepDouble: rate is 2 * base_rate from here on
  std::optional<BurstSpec> burst;

  /// ConfigError on rates <= 0, a burst outside [0, duration], or a burst
  /// entity that does not exist.
  void validate() const;

  /// Flat key = value file: seed, duration, entities, base_rate,
  /// rate_profile (constant | step_double), step_at, burst.start,
  /// burst.length, burst.entity, burst.flows, burst.ports.
  static StreamSpec parse(std::istream& in);
  static StreamSpec load(const std::string& path);
};

struct StreamSummary {
  std::uint64_t flows = 0;
  std::uint64_t attack_flows = 0;
  double first_time = 0.0;
  double last_time = 0.0;
};

/// Entity address for index i.
IpAddress synth_entity(std::size_t index);

/// Writes a metadata comment, a header with a label column and time-sorted
/// rows in the standard ingest format.
StreamSummary generate_flow_stream(const StreamSpec& spec, std::ostream& out);

}  // namespace pvalert
