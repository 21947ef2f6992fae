#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pvalert/ip.hpp"

namespace pvalert {

enum class Label : std::uint8_t { Benign, Attack };

/// One IP-to-IP flow summary.
struct FlowRecord {
  double time = 0.0;  // seconds
  std::string protocol;
  IpAddress src_ip;
  std::uint16_t src_port = 0;
  IpAddress dst_ip;
  std::uint16_t dst_port = 0;
  std::uint64_t src_bytes = 0;
  std::uint64_t dst_bytes = 0;
  std::uint64_t tot_bytes = 0;
  std::optional<Label> label;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

}  // namespace pvalert
