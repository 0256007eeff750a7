// Layered run configuration: INI-style sections parsed from text, command
// line overrides merged on top, typed access with recorded defaults, and
// schema validation that rejects unknown keys with their line numbers.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace biooss {

// One configured value and where it came from (line 0 = command line).
struct ConfigEntry {
  std::string value;
  int line = 0;
};

// Parsed key/value configuration, addressed by dotted "section.key" names.
//
// Accepted text format: `[section]` headers, `key = value` lines, blank
// lines, and full-line comments starting with `#` or `;`. Values run to the
// end of the line (no inline comments) and must be non-empty. Section and
// key names use lowercase letters, digits, `_`, and `-`. Keys before any
// section header, malformed lines, and duplicate keys raise ConfigError
// with the offending line number.
//
// Typed getters parse on demand and raise ConfigError naming the key and
// its source line when the value does not parse. Every getter records the
// value it returned (configured or default) in the effective-value map, so
// a command's manifest can echo exactly the configuration it acted on.
class RunConfig {
 public:
  static RunConfig parse(const std::string& text);
  // Reads and parses a file; errors are prefixed with the path.
  static RunConfig load(const std::string& path);

  // Applies one "section.key=value" command-line override (wins over the
  // file). Throws ConfigError on a malformed spec.
  void set_override(const std::string& spec);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key,
                        std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  // Rejects every present key that is not in `allowed`, listing each with
  // its source line, so schema errors surface before any compute.
  void require_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, ConfigEntry>& entries() const {
    return entries_;
  }
  // Every key a getter consulted, with the value actually used.
  const std::map<std::string, std::string>& effective() const {
    return effective_;
  }

 private:
  const ConfigEntry* find(const std::string& key) const;
  void record(const std::string& key, const std::string& value) const;

  std::map<std::string, ConfigEntry> entries_;
  mutable std::map<std::string, std::string> effective_;
};

// Canonical text for a double: up to 17 significant digits, enough for a
// bit-exact reload.
std::string format_double(double v);

}  // namespace biooss
