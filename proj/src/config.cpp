#include "spectral_tower/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "spectral_tower/errors.hpp"

namespace spectral_tower {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::int64_t parse_integer(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw ValidationError(what + ": expected an integer, got '" + text + "'");
  return value;
}

double parse_real(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw ValidationError(what + ": expected a number, got '" + text + "'");
  return value;
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto sep = line.find('=');
    if (sep == std::string::npos) sep = line.find(':');
    if (sep == std::string::npos)
      throw ValidationError("line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, sep));
    std::string value = trim(line.substr(sep + 1));
    if (key.empty()) throw ValidationError("line " + std::to_string(lineno) + ": empty key");
    if (kv.values_.count(key)) throw ValidationError("duplicate key '" + key + "'");
    kv.values_.emplace(std::move(key), std::move(value));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string KeyValues::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("missing key '" + key + "'");
  return it->second;
}

std::int64_t KeyValues::get_int(const std::string& key) const { return parse_integer(get_string(key), key); }

double KeyValues::get_double(const std::string& key) const { return parse_real(get_string(key), key); }

Dyadic KeyValues::get_dyadic(const std::string& key) const {
  try {
    return Dyadic::parse(get_string(key));
  } catch (const ValidationError& e) {
    throw ValidationError(key + ": " + e.what());
  }
}

bool KeyValues::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ValidationError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::int64_t> KeyValues::get_int_list(const std::string& key) const {
  const std::string v = get_string(key);
  std::vector<std::int64_t> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_integer(item, key));
  return out;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

Dyadic KeyValues::get_dyadic(const std::string& key, const Dyadic& fallback) const {
  return has(key) ? get_dyadic(key) : fallback;
}

void KeyValues::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("unknown config key '" + key + "'");
  }
}

}  // namespace spectral_tower
