#include "slicer/config.h"

#include <fstream>
#include <sstream>

#include "csv.h"
#include "slicer/error.h"

namespace slicer {

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string s(csv::trim(line));
    if (s.empty() || s.front() == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", number);
    std::string key(csv::trim(std::string_view(s).substr(0, eq)));
    std::string value(csv::trim(std::string_view(s).substr(eq + 1)));
    if (key.empty()) throw ParseError("empty key", number);
    cfg.values_[key] = value;
    cfg.lines_[key] = number;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

std::optional<std::string> KeyValueConfig::lookup(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return lookup(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = lookup(key);
  if (!v) return fallback;
  try {
    return csv::parse_double(*v, 0);
  } catch (const Error&) {
    throw ConfigError("'" + key + "' expects a number, got '" + *v + "'");
  }
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = lookup(key);
  if (!v) return fallback;
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(*v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v->size()) throw ConfigError("'" + key + "' expects an integer, got '" + *v + "'");
  return out;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  std::int64_t v = get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("'" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto v = lookup(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (auto part : csv::split(*v)) {
    std::string_view p = csv::trim(part);
    if (p.empty()) continue;
    try {
      out.push_back(csv::parse_double(p, 0));
    } catch (const Error&) {
      throw ConfigError("'" + key + "' expects comma-separated numbers, got '" + *v + "'");
    }
  }
  return out;
}

std::vector<int> KeyValueConfig::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  std::vector<double> fb(fallback.begin(), fallback.end());
  std::vector<int> out;
  for (double d : get_doubles(key, fb)) {
    if (d != static_cast<int>(d)) throw ConfigError("'" + key + "' expects integers");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

std::string KeyValueConfig::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace slicer
