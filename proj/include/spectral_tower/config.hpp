#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spectral_tower/dyadic.hpp"

namespace spectral_tower {

/// Flat `key = value` text file. Blank lines and `#` comments are ignored;
/// `key: value` is accepted as well. Duplicate keys are an error.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  Dyadic get_dyadic(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// Comma separated integers; rejects anything that is not an integer literal.
  std::vector<std::int64_t> get_int_list(const std::string& key) const;

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  Dyadic get_dyadic(const std::string& key, const Dyadic& fallback) const;

  /// Throws ValidationError naming the first key not in `allowed`.
  void require_known(const std::vector<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

std::int64_t parse_integer(const std::string& text, const std::string& what);
double parse_real(const std::string& text, const std::string& what);

}  // namespace spectral_tower
