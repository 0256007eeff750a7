// INI-style configuration parsing with typed, recorded access.
#include "biooss/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "biooss/common.hpp"

namespace biooss {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') ||
                    ch == '_' || ch == '-';
    if (!ok) return false;
  }
  return true;
}

std::string where(const ConfigEntry& entry) {
  return entry.line == 0 ? std::string("command line")
                         : "line " + std::to_string(entry.line);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_name(section)) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": invalid section name '" + section + "'");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": key before any [section] header");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_name(key)) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": invalid key name '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key +
                        "' has an empty value");
    }
    const std::string dotted = section + "." + key;
    const auto prev = cfg.entries_.find(dotted);
    if (prev != cfg.entries_.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" +
                        dotted + "' (first set at line " +
                        std::to_string(prev->second.line) + ")");
    }
    cfg.entries_[dotted] = ConfigEntry{value, line_no};
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is.good()) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << is.rdbuf();
  try {
    return parse(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void RunConfig::set_override(const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + spec + "' must look like section.key=value");
  }
  const std::string dotted = trim(spec.substr(0, eq));
  const std::string value = trim(spec.substr(eq + 1));
  const std::size_t dot = dotted.find('.');
  if (dot == std::string::npos || !valid_name(dotted.substr(0, dot)) ||
      !valid_name(dotted.substr(dot + 1))) {
    throw ConfigError("override '" + spec + "' must look like section.key=value");
  }
  if (value.empty()) {
    throw ConfigError("override '" + dotted + "' has an empty value");
  }
  entries_[dotted] = ConfigEntry{value, 0};
}

const ConfigEntry* RunConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void RunConfig::record(const std::string& key, const std::string& value) const {
  effective_[key] = value;
}

bool RunConfig::has(const std::string& key) const {
  return find(key) != nullptr;
}

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
  const ConfigEntry* entry = find(key);
  const std::string value = entry ? entry->value : fallback;
  record(key, value);
  return value;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const ConfigEntry* entry = find(key);
  if (!entry) {
    record(key, format_double(fallback));
    return fallback;
  }
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(entry->value.c_str(), &end);
  if (errno != 0 || end == entry->value.c_str() || *end != '\0') {
    throw ConfigError(where(*entry) + ": key '" + key + "' value '" +
                      entry->value + "' is not a number");
  }
  record(key, entry->value);
  return v;
}

long RunConfig::get_int(const std::string& key, long fallback) const {
  const ConfigEntry* entry = find(key);
  if (!entry) {
    record(key, std::to_string(fallback));
    return fallback;
  }
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(entry->value.c_str(), &end, 10);
  if (errno != 0 || end == entry->value.c_str() || *end != '\0') {
    throw ConfigError(where(*entry) + ": key '" + key + "' value '" +
                      entry->value + "' is not an integer");
  }
  record(key, entry->value);
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key,
                                 std::uint64_t fallback) const {
  const ConfigEntry* entry = find(key);
  if (!entry) {
    record(key, std::to_string(fallback));
    return fallback;
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(entry->value.c_str(), &end, 10);
  if (errno != 0 || end == entry->value.c_str() || *end != '\0' ||
      entry->value[0] == '-') {
    throw ConfigError(where(*entry) + ": key '" + key + "' value '" +
                      entry->value + "' is not an unsigned integer");
  }
  record(key, entry->value);
  return static_cast<std::uint64_t>(v);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const ConfigEntry* entry = find(key);
  if (!entry) {
    record(key, fallback ? "true" : "false");
    return fallback;
  }
  std::string v;
  for (char ch : entry->value) {
    v.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  bool result = false;
  if (v == "true" || v == "yes" || v == "on" || v == "1") {
    result = true;
  } else if (v == "false" || v == "no" || v == "off" || v == "0") {
    result = false;
  } else {
    throw ConfigError(where(*entry) + ": key '" + key + "' value '" +
                      entry->value + "' is not a boolean");
  }
  record(key, result ? "true" : "false");
  return result;
}

std::vector<double> RunConfig::get_double_list(
    const std::string& key, const std::vector<double>& fallback) const {
  const ConfigEntry* entry = find(key);
  if (!entry) {
    std::string rendered;
    for (std::size_t i = 0; i < fallback.size(); ++i) {
      if (i > 0) rendered.push_back(',');
      rendered += format_double(fallback[i]);
    }
    record(key, rendered);
    return fallback;
  }
  std::vector<double> values;
  std::istringstream is(entry->value);
  std::string item;
  while (std::getline(is, item, ',')) {
    const std::string token = trim(item);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (token.empty() || errno != 0 || end == token.c_str() || *end != '\0') {
      throw ConfigError(where(*entry) + ": key '" + key + "' item '" + token +
                        "' is not a number");
    }
    values.push_back(v);
  }
  if (values.empty()) {
    throw ConfigError(where(*entry) + ": key '" + key +
                      "' holds an empty list");
  }
  record(key, entry->value);
  return values;
}

void RunConfig::require_known(const std::set<std::string>& allowed) const {
  std::string bad;
  for (const auto& [key, entry] : entries_) {
    if (allowed.count(key) == 0) {
      if (!bad.empty()) bad += "; ";
      bad += "unknown key '" + key + "' (" + where(entry) + ")";
    }
  }
  if (!bad.empty()) {
    throw ConfigError(bad);
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace biooss
