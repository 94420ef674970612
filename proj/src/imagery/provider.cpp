#include <algorithm>

#include "demandmap/imagery.hpp"
#include "demandmap/rng.hpp"

namespace demandmap::imagery {

std::vector<SceneMeta> query_scenes(TileProvider& provider, const SceneQuery& q) {
  if (q.start_ts > q.end_ts) throw ArgumentError("scene query: start after end");
  if (q.max_cloud_fraction < 0.0 || q.max_cloud_fraction > 1.0) {
    throw ArgumentError("scene query: max_cloud_fraction outside [0,1]");
  }
  std::vector<SceneMeta> scenes = provider.list_scenes(q);
  std::vector<SceneMeta> admissible;
  for (auto& s : scenes) {
    if (s.cloud_fraction > q.max_cloud_fraction) continue;
    if (s.timestamp < q.start_ts || s.timestamp > q.end_ts) continue;
    admissible.push_back(std::move(s));
  }
  std::sort(admissible.begin(), admissible.end(), [](const SceneMeta& a, const SceneMeta& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.scene_id < b.scene_id;
  });
  return admissible;
}

SceneMeta select_latest(const std::vector<SceneMeta>& scenes) {
  if (scenes.empty()) throw DataError("select_latest: no scenes to choose from");
  const SceneMeta* best = &scenes.front();
  for (const auto& s : scenes) {
    if (s.timestamp > best->timestamp ||
        (s.timestamp == best->timestamp && s.scene_id < best->scene_id)) {
      best = &s;
    }
  }
  return *best;
}

MockProvider::MockProvider(std::string id, std::vector<SceneMeta> scenes, PixelFn pixels)
    : id_(std::move(id)), scenes_(std::move(scenes)), pixels_(std::move(pixels)) {}

std::unique_ptr<MockProvider> MockProvider::constant_gray(uint8_t value) {
  SceneMeta scene;
  scene.scene_id = "mock-constant";
  scene.timestamp = parse_iso8601("2016-06-01T00:00:00Z");
  scene.cloud_fraction = 0.0;
  scene.footprint = geo::world_bbox();
  auto fill = [value](double, double, int, ImageBuf& tile) {
    std::fill(tile.pixels.begin(), tile.pixels.end(), value);
  };
  return std::make_unique<MockProvider>("mock", std::vector<SceneMeta>{scene}, fill);
}

std::vector<SceneMeta> MockProvider::list_scenes(const SceneQuery& q) {
  query_count_.fetch_add(1);
  geo::LatLon at{0, 0};
  if (q.point.has_value()) at = *q.point;
  else if (q.box.has_value()) at = q.box->center();
  std::vector<SceneMeta> out;
  for (auto scene : scenes_) {
    if (!scene.footprint.contains(at.lat, at.lon)) continue;
    if (cloud_hole_.has_value() && cloud_hole_->contains(at.lat, at.lon)) {
      scene.cloud_fraction = 1.0;
    }
    out.push_back(std::move(scene));
  }
  return out;
}

ImageBuf MockProvider::download(const SceneMeta&, double lat, double lon, int zoom) {
  download_count_.fetch_add(1);
  ImageBuf tile;
  tile.width = kTileSize;
  tile.height = corrupt_dimensions_ ? kTileSize - 1 : kTileSize;
  tile.channels = 3;
  tile.pixels.assign(static_cast<size_t>(tile.width) * tile.height * 3, 0);
  pixels_(lat, lon, zoom, tile);
  return tile;
}

}  // namespace demandmap::imagery
