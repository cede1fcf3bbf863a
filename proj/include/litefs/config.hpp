#pragma once

// Flat UTF-8 key=value configuration with '#' comments. Values are looked up
// through typed getters; keys never read are reported by unused_keys() so a
// typo in a config file is an error rather than a silent default.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace litefs {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list of doubles.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  std::vector<std::string> unused_keys() const;
  // Throws ConfigError listing every key that was never read.
  void require_all_used() const;

 private:
  std::optional<std::string> lookup(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
  std::string origin_;
  mutable std::set<std::string> used_;
};

}  // namespace litefs
