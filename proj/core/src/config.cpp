#include "lddm/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

extern char** environ;

namespace lddm {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void parse_line(std::map<std::string, std::string>& kv, const std::string& raw, int lineno) {
  std::string line = raw;
  size_t hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  line = trim(line);
  if (line.empty()) return;
  size_t eq = line.find('=');
  if (eq == std::string::npos) {
    throw invalid_argument("config: missing '=' on line " + std::to_string(lineno));
  }
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  if (key.empty()) {
    throw invalid_argument("config: empty key on line " + std::to_string(lineno));
  }
  kv[key] = value;
}

}  // namespace

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid_argument("config: cannot open " + path);
  KvConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) parse_line(cfg.kv_, line, ++lineno);
  return cfg;
}

KvConfig KvConfig::from_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) parse_line(cfg.kv_, line, ++lineno);
  return cfg;
}

void KvConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    size_t eq = a.find('=');
    if (eq == std::string::npos) {
      throw invalid_argument("override must look like key=value: " + a);
    }
    kv_[trim(a.substr(0, eq))] = trim(a.substr(eq + 1));
  }
}

void KvConfig::apply_env(const char* prefix) {
  size_t plen = std::string(prefix).size();
  for (char** e = environ; *e != nullptr; ++e) {
    std::string entry(*e);
    if (entry.rfind(prefix, 0) != 0) continue;
    size_t eq = entry.find('=');
    if (eq == std::string::npos || eq <= plen) continue;
    std::string key = entry.substr(plen, eq - plen);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    kv_[key] = entry.substr(eq + 1);
  }
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::string KvConfig::require_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw invalid_argument("config: missing required key '" + key + "'");
  return it->second;
}

long KvConfig::get_int(const std::string& key, long fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    size_t pos = 0;
    long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw invalid_argument("config: key '" + key + "' is not an integer: " + it->second);
  }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw invalid_argument("config: key '" + key + "' is not a number: " + it->second);
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw invalid_argument("config: key '" + key + "' is not a boolean: " + it->second);
}

std::string KvConfig::to_string() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace lddm
