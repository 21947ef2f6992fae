#include "pvalert/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "pvalert/error.hpp"

namespace pvalert {

std::string_view to_string(Feature f) { return f == Feature::Port ? "port" : "pcr"; }

std::optional<Feature> parse_feature(std::string_view text) {
  if (text == "port") return Feature::Port;
  if (text == "pcr") return Feature::Pcr;
  return std::nullopt;
}

std::optional<std::size_t> port_bin(std::uint16_t dst_port, Direction direction) {
  if (dst_port < 1 || dst_port > kMaxPrivatePort) return std::nullopt;
  const std::size_t offset = direction == Direction::Outbound ? 0 : kMaxPrivatePort;
  return offset + dst_port - 1;
}

std::optional<std::size_t> port_bin(const FlowRecord& flow, Direction direction) {
  return port_bin(flow.dst_port, direction);
}

double pcr(std::uint64_t src_bytes, std::uint64_t dst_bytes) {
  if (src_bytes == 0 && dst_bytes == 0) {
    throw InputError("producer-consumer ratio undefined for a flow with no bytes");
  }
  const auto s = static_cast<double>(src_bytes);
  const auto d = static_cast<double>(dst_bytes);
  return (s - d) / (s + d);
}

std::size_t pcr_bin(double value) {
  if (!(value >= -1.0 && value <= 1.0)) {
    throw InputError("producer-consumer ratio outside [-1, 1]: " + std::to_string(value));
  }
  // Edges as literals so that a value written as -0.4 lands on the -0.4 edge.
  static constexpr std::array<double, kPcrBins> kLeftEdges = {
      -1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8};
  const auto it = std::upper_bound(kLeftEdges.begin(), kLeftEdges.end(), value);
  return static_cast<std::size_t>(it - kLeftEdges.begin()) - 1;
}

}  // namespace pvalert
