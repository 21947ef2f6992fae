#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "pvalert/flow.hpp"
#include "pvalert/ip.hpp"

namespace pvalert {

inline constexpr std::size_t kPortBins = 2048;
inline constexpr std::size_t kPcrBins = 10;
inline constexpr std::uint16_t kMaxPrivatePort = 1024;

enum class Feature : std::uint8_t { Port, Pcr };
enum class Direction : std::uint8_t { Inbound, Outbound };

std::string_view to_string(Feature f);
std::optional<Feature> parse_feature(std::string_view text);

struct DetectorKey {
  IpAddress entity;
  Feature feature = Feature::Port;

  friend auto operator<=>(const DetectorKey&, const DetectorKey&) = default;
};

/// Outbound private destination ports 1..1024 map to bins 0..1023, inbound to
/// 1024..2047. Any other port carries no port observation.
std::optional<std::size_t> port_bin(std::uint16_t dst_port, Direction direction);
std::optional<std::size_t> port_bin(const FlowRecord& flow, Direction direction);

/// Producer-consumer ratio (src - dst) / (src + dst) in [-1, 1]. Throws
/// InputError when both byte counts are zero.
double pcr(std::uint64_t src_bytes, std::uint64_t dst_bytes);

/// Ten equal-width bins over [-1, 1], left-closed, with +1 in the top bin.
std::size_t pcr_bin(double value);

}  // namespace pvalert

template <>
struct std::hash<pvalert::DetectorKey> {
  std::size_t operator()(const pvalert::DetectorKey& k) const noexcept {
    return std::hash<pvalert::IpAddress>{}(k.entity) * 31u + static_cast<std::size_t>(k.feature);
  }
};
