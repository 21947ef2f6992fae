#include "pvalert/ip.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <cstring>

namespace pvalert {

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
  if (text.empty() || text.size() >= INET6_ADDRSTRLEN) return std::nullopt;
  char buf[INET6_ADDRSTRLEN] = {};
  std::memcpy(buf, text.data(), text.size());

  IpAddress out;
  if (text.find(':') == std::string_view::npos) {
    in_addr a4{};
    if (inet_pton(AF_INET, buf, &a4) != 1) return std::nullopt;
    out.family_ = Family::V4;
    std::memcpy(out.bytes_.data() + 12, &a4.s_addr, 4);
  } else {
    in6_addr a6{};
    if (inet_pton(AF_INET6, buf, &a6) != 1) return std::nullopt;
    out.family_ = Family::V6;
    std::memcpy(out.bytes_.data(), a6.s6_addr, 16);
  }
  return out;
}

IpAddress IpAddress::v4(std::uint32_t host_order) {
  IpAddress out;
  out.family_ = Family::V4;
  out.bytes_[12] = static_cast<std::uint8_t>(host_order >> 24);
  out.bytes_[13] = static_cast<std::uint8_t>(host_order >> 16);
  out.bytes_[14] = static_cast<std::uint8_t>(host_order >> 8);
  out.bytes_[15] = static_cast<std::uint8_t>(host_order);
  return out;
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (family_ == Family::V4) {
    inet_ntop(AF_INET, bytes_.data() + 12, buf, sizeof buf);
  } else {
    inet_ntop(AF_INET6, bytes_.data(), buf, sizeof buf);
  }
  return buf;
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
  const auto slash = text.find('/');
  auto addr = IpAddress::parse(text.substr(0, slash));
  if (!addr) return std::nullopt;
  const int max_len = addr->family() == IpAddress::Family::V4 ? 32 : 128;
  int len = max_len;
  if (slash != std::string_view::npos) {
    const auto digits = text.substr(slash + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), len);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || len < 0 || len > max_len) {
      return std::nullopt;
    }
  }
  Cidr out;
  out.network_ = *addr;
  out.prefix_len_ = len;
  return out;
}

bool Cidr::contains(const IpAddress& addr) const {
  if (addr.family() != network_.family()) return false;
  const std::size_t offset = network_.family() == IpAddress::Family::V4 ? 12 : 0;
  const auto& a = addr.bytes();
  const auto& n = network_.bytes();
  int remaining = prefix_len_;
  for (std::size_t i = offset; i < 16 && remaining > 0; ++i, remaining -= 8) {
    const int bits = remaining >= 8 ? 8 : remaining;
    const auto mask = static_cast<std::uint8_t>(0xFFu << (8 - bits));
    if ((a[i] & mask) != (n[i] & mask)) return false;
  }
  return true;
}

std::string Cidr::to_string() const {
  return network_.to_string() + "/" + std::to_string(prefix_len_);
}

}  // namespace pvalert
