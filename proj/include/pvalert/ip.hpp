#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace pvalert {

/// IPv4 or IPv6 address. IPv4 is stored in the low four bytes.
class IpAddress {
 public:
  enum class Family : std::uint8_t { V4, V6 };

  IpAddress() = default;

  static std::optional<IpAddress> parse(std::string_view text);
  static IpAddress v4(std::uint32_t host_order);

  [[nodiscard]] Family family() const { return family_; }
  [[nodiscard]] const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
  [[nodiscard]] std::string to_string() const;

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;

 private:
  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};
};

class Cidr {
 public:
  /// "a.b.c.d/n" or "x::y/n"; a bare address means a full-length prefix.
  static std::optional<Cidr> parse(std::string_view text);

  [[nodiscard]] bool contains(const IpAddress& addr) const;
  [[nodiscard]] std::string to_string() const;

 private:
  IpAddress network_;
  int prefix_len_ = 0;
};

}  // namespace pvalert

template <>
struct std::hash<pvalert::IpAddress> {
  std::size_t operator()(const pvalert::IpAddress& a) const noexcept {
    // FNV-1a over the address bytes.
    std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(a.family());
    for (auto b : a.bytes()) {
      h ^= b;
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};
