#ifndef DEMANDMAP_KEYVAL_HPP_
#define DEMANDMAP_KEYVAL_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace demandmap {

// Flat key=value text, one pair per line, '#' comments, whitespace trimmed.
// Used for survey manifests, pipeline config and tile/explain sidecars.
using KeyVal = std::map<std::string, std::string>;

KeyVal parse_keyval(const std::string& text);
KeyVal read_keyval(const std::string& path);
void write_keyval(const std::string& path, const std::vector<std::pair<std::string, std::string>>& pairs);
std::string format_keyval(const std::vector<std::pair<std::string, std::string>>& pairs);

// Typed lookups; `require_*` throw ConfigError naming the key.
std::string kv_get(const KeyVal& kv, const std::string& key, const std::string& fallback);
std::string kv_require(const KeyVal& kv, const std::string& key, const std::string& what);
double kv_get_double(const KeyVal& kv, const std::string& key, double fallback);
int64_t kv_get_int(const KeyVal& kv, const std::string& key, int64_t fallback);
bool kv_get_bool(const KeyVal& kv, const std::string& key, bool fallback);

}  // namespace demandmap

#endif  // DEMANDMAP_KEYVAL_HPP_
