#pragma once

#include <map>
#include <string>
#include <vector>

#include "lddm/errors.hpp"

namespace lddm {

// Flat key=value run configuration: one key per line, '#' comments.
// Environment variables prefixed LDDM_ override file values (LDDM_FAMILY
// overrides "family"), and explicit "key=value" override strings beat both.
class KvConfig {
 public:
  static KvConfig load(const std::string& path);
  static KvConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void apply_overrides(const std::vector<std::string>& assignments);
  void apply_env(const char* prefix = "LDDM_");

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::string require_str(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }
  // Canonical one-key-per-line rendering (manifest snapshots).
  std::string to_string() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace lddm
