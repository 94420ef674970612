#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "demandmap/imagery.hpp"
#include "demandmap/rng.hpp"

namespace demandmap::imagery {

namespace {

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

// Splits "https://host[:port]/path" into (scheme://host[:port], /path).
std::pair<std::string, std::string> split_url(const std::string& url) {
  size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("provider URL lacks a scheme: " + url);
  size_t path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

}  // namespace

HttpTileProvider::HttpTileProvider(HttpProviderConfig config) : config_(std::move(config)) {
  if (config_.url_template.empty()) throw ConfigError("provider.url_template is empty");
}

std::string HttpTileProvider::id() const {
  return "http:" + to_hex(fnv1a64(config_.url_template));
}

std::vector<uint8_t> HttpTileProvider::get_with_retries(const std::string& url) {
  auto [host, path] = split_url(url);
  std::string token;
  if (!config_.auth_env.empty()) {
    const char* v = std::getenv(config_.auth_env.c_str());
    if (!v || !*v) {
      throw CredentialError("environment variable " + config_.auth_env + " is not set");
    }
    token = v;
  }
  Rng jitter(fnv1a64(url));
  std::string last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0) {
      double base = static_cast<double>(config_.retry_base_ms) * std::pow(2.0, attempt - 1);
      auto delay = static_cast<long>(base * (1.0 + 0.25 * jitter.next_double()));
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    auto res = client.Get(path, headers);
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw CredentialError(strf("provider rejected credentials (HTTP %d) for %s", res->status,
                                 url.c_str()));
    }
    if (res->status >= 500) {
      last_error = strf("HTTP %d", res->status);
      continue;
    }
    if (res->status != 200) {
      throw TransportError(strf("HTTP %d fetching %s", res->status, url.c_str()));
    }
    return std::vector<uint8_t>(res->body.begin(), res->body.end());
  }
  throw TransportError("gave up after 3 attempts fetching " + url + " (" + last_error + ")");
}

std::vector<SceneMeta> HttpTileProvider::list_scenes(const SceneQuery& q) {
  if (config_.scenes_url.empty()) {
    // No catalog endpoint: one synthetic full-coverage scene at the end of
    // the requested range.
    SceneMeta scene;
    scene.scene_id = "default";
    scene.timestamp = q.end_ts;
    scene.cloud_fraction = 0.0;
    scene.footprint = geo::world_bbox();
    return {scene};
  }
  auto body = get_with_retries(config_.scenes_url);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body.begin(), body.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError(std::string("scene catalog is not valid JSON: ") + e.what());
  }
  std::vector<SceneMeta> scenes;
  for (const auto& item : doc) {
    SceneMeta s;
    s.scene_id = item.at("scene_id").get<std::string>();
    if (item.at("timestamp").is_string()) {
      s.timestamp = parse_iso8601(item.at("timestamp").get<std::string>());
    } else {
      s.timestamp = item.at("timestamp").get<int64_t>();
    }
    s.cloud_fraction = item.value("cloud_fraction", 0.0);
    if (item.contains("footprint")) {
      const auto& f = item.at("footprint");
      s.footprint = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>(),
                     f.at(3).get<double>()};
    } else {
      s.footprint = geo::world_bbox();
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

ImageBuf HttpTileProvider::download(const SceneMeta& scene, double lat, double lon, int zoom) {
  std::string url = config_.url_template;
  url = replace_all(url, "{scene}", scene.scene_id);
  url = replace_all(url, "{lat}", strf("%.7f", lat));
  url = replace_all(url, "{lon}", strf("%.7f", lon));
  url = replace_all(url, "{zoom}", strf("%d", zoom));
  auto bytes = get_with_retries(url);
  return decode_png(bytes);
}

}  // namespace demandmap::imagery
