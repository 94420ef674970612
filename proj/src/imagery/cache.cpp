#include <filesystem>

#include "demandmap/imagery.hpp"
#include "demandmap/keyval.hpp"

namespace demandmap::imagery {

namespace fs = std::filesystem;

TileCache::TileCache(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  index_existing();
}

std::string TileCache::make_key(const std::string& provider_id, const std::string& scene_id,
                                double lat, double lon, int zoom) {
  std::string material = provider_id + "|" + scene_id + "|" + strf("%.7f|%.7f|%d", lat, lon, zoom);
  return to_hex(fnv1a64(material));
}

std::string TileCache::point_key(double lat, double lon, int zoom) {
  return strf("%.7f|%.7f|%d", lat, lon, zoom);
}

std::string TileCache::png_path(const std::string& key) const {
  return (fs::path(dir_) / (key + ".png")).string();
}

std::string TileCache::meta_path(const std::string& key) const {
  return (fs::path(dir_) / (key + ".meta")).string();
}

void TileCache::index_existing() {
  std::lock_guard<std::mutex> lock(index_mutex_);
  point_index_.clear();
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.path().extension() != ".meta") continue;
    try {
      KeyVal kv = read_keyval(entry.path().string());
      PointEntry pe;
      pe.key = entry.path().stem().string();
      pe.scene_id = kv_get(kv, "scene_id", "");
      pe.timestamp = kv_get_int(kv, "timestamp", 0);
      double lat = kv_get_double(kv, "lat", 0);
      double lon = kv_get_double(kv, "lon", 0);
      int zoom = static_cast<int>(kv_get_int(kv, "zoom", 0));
      point_index_[point_key(lat, lon, zoom)] = pe;
    } catch (const Error&) {
      // Unreadable sidecar: ignore; the entry will be refetched.
    }
  }
}

bool TileCache::has(const std::string& key) const {
  return fs::exists(png_path(key)) && fs::exists(meta_path(key));
}

std::optional<ImageTile> TileCache::read(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  try {
    ImageTile tile;
    tile.pixels = read_png(png_path(key));
    KeyVal kv = read_keyval(meta_path(key));
    tile.scene_id = kv_get(kv, "scene_id", "");
    tile.timestamp = kv_get_int(kv, "timestamp", 0);
    if (tile.pixels.width != kTileSize || tile.pixels.height != kTileSize ||
        tile.pixels.channels != 3) {
      return std::nullopt;
    }
    return tile;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void TileCache::write(const std::string& key, const ImageTile& tile, double lat, double lon,
                      int zoom) {
  size_t shard = fnv1a64(key) % kShards;
  std::lock_guard<std::mutex> write_lock(shard_mutex_[shard]);
  // Atomic publish: write to temp names, then rename over the final ones.
  std::string tmp_png = png_path(key) + ".tmp";
  std::string tmp_meta = meta_path(key) + ".tmp";
  write_png(tmp_png, tile.pixels);
  write_keyval(tmp_meta, {{"scene_id", tile.scene_id},
                          {"timestamp", strf("%lld", static_cast<long long>(tile.timestamp))},
                          {"lat", strf("%.7f", lat)},
                          {"lon", strf("%.7f", lon)},
                          {"zoom", strf("%d", zoom)}});
  fs::rename(tmp_png, png_path(key));
  fs::rename(tmp_meta, meta_path(key));
  std::lock_guard<std::mutex> lock(index_mutex_);
  point_index_[point_key(lat, lon, zoom)] = {key, tile.scene_id, tile.timestamp};
}

void TileCache::erase(const std::string& key) {
  size_t shard = fnv1a64(key) % kShards;
  std::lock_guard<std::mutex> write_lock(shard_mutex_[shard]);
  std::error_code ec;
  fs::remove(png_path(key), ec);
  fs::remove(meta_path(key), ec);
  std::lock_guard<std::mutex> lock(index_mutex_);
  for (auto it = point_index_.begin(); it != point_index_.end();) {
    if (it->second.key == key) it = point_index_.erase(it);
    else ++it;
  }
}

std::optional<TileCache::PointEntry> TileCache::find_by_point(double lat, double lon,
                                                              int zoom) const {
  std::lock_guard<std::mutex> lock(index_mutex_);
  auto it = point_index_.find(point_key(lat, lon, zoom));
  if (it == point_index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace demandmap::imagery
