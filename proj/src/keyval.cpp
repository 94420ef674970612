#include "demandmap/keyval.hpp"

#include <sstream>

#include "demandmap/common.hpp"

namespace demandmap {

KeyVal parse_keyval(const std::string& text) {
  KeyVal kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(strf("line %d: expected key=value, got \"%s\"", lineno, t.c_str()));
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyVal read_keyval(const std::string& path) {
  return parse_keyval(read_text_file(path));
}

std::string format_keyval(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::ostringstream out;
  for (const auto& [k, v] : pairs) out << k << "=" << v << "\n";
  return out.str();
}

void write_keyval(const std::string& path, const std::vector<std::pair<std::string, std::string>>& pairs) {
  write_text_file(path, format_keyval(pairs));
}

std::string kv_get(const KeyVal& kv, const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::string kv_require(const KeyVal& kv, const std::string& key, const std::string& what) {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) {
    throw ConfigError("missing required " + what + " key: " + key);
  }
  return it->second;
}

double kv_get_double(const KeyVal& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) return fallback;
  double v;
  if (!parse_double(it->second, v)) throw ConfigError("key " + key + ": not a number: " + it->second);
  return v;
}

int64_t kv_get_int(const KeyVal& kv, const std::string& key, int64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) return fallback;
  int64_t v;
  if (!parse_int(it->second, v)) throw ConfigError("key " + key + ": not an integer: " + it->second);
  return v;
}

bool kv_get_bool(const KeyVal& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) return fallback;
  std::string v = lower(it->second);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("key " + key + ": not a boolean: " + it->second);
}

}  // namespace demandmap
