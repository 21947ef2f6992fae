#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace pvalert {

/// Flat "key = value" settings. '#' starts a comment. Every key must be one
/// of the known knobs; anything else is a ConfigError, as is a malformed value
/// when it is read.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in);
  static Config parse_string(std::string_view text);
  static Config load(const std::string& path);

  void set(std::string key, std::string value);
  [[nodiscard]] bool has(std::string_view key) const;
  [[nodiscard]] std::optional<std::string> get(std::string_view key) const;

  [[nodiscard]] std::string get_string(std::string_view key, std::string_view fallback) const;
  [[nodiscard]] double get_double(std::string_view key, double fallback) const;
  [[nodiscard]] std::optional<double> get_optional_double(std::string_view key) const;
  [[nodiscard]] std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;

  [[nodiscard]] const std::map<std::string, std::string, std::less<>>& entries() const {
    return entries_;
  }

  static bool is_known_key(std::string_view key);

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

/// "," ";" "|" "tab" or "\t".
char parse_delimiter(std::string_view text);

}  // namespace pvalert
