#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace semex::util {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat `key = value` configuration with '#' comments. Lookups record which
// keys were consumed so a caller can reject unknown keys (usually typos).
// Later set() calls win, which gives the precedence chain
//   defaults (the get_* fallback) < file < command-line override.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig from_file(const std::string& path);   // ConfigError on parse issues
  static KvConfig from_string(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;  // true/false/yes/no/1/0
  // Comma-separated unsigned integers, e.g. "1,2,3".
  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          std::vector<std::uint64_t> fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  // Keys present but never consumed by any get_*; call after resolution.
  std::vector<std::string> unconsumed() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  mutable std::map<std::string, bool> consumed_;
};

// "key=value" command-line override, split on the first '='.
std::pair<std::string, std::string> parse_override(const std::string& arg);

}  // namespace semex::util
