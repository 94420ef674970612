#include <algorithm>
#include <thread>

#include "demandmap/csv.hpp"
#include "demandmap/imagery.hpp"

namespace demandmap::imagery {

ImageTile fetch_tile(TileProvider& provider, TileCache& cache, const SceneMeta& scene,
                     const geo::SamplePoint& p, int zoom, bool* was_cached) {
  if (!scene.footprint.contains(p.lat, p.lon)) {
    throw CoverageError(strf("scene %s does not cover point (%.5f, %.5f)", scene.scene_id.c_str(),
                             p.lat, p.lon));
  }
  std::string key = TileCache::make_key(provider.id(), scene.scene_id, p.lat, p.lon, zoom);
  if (auto cached = cache.read(key)) {
    if (was_cached) *was_cached = true;
    cached->tile_id = strf("%s_%02d", p.owner_id.c_str(), p.index);
    cached->owner_id = p.owner_id;
    cached->index = p.index;
    return *cached;
  }
  if (cache.has(key)) cache.erase(key);  // unreadable or wrong-shaped entry

  ImageBuf pixels = provider.download(scene, p.lat, p.lon, zoom);
  if (pixels.width != kTileSize || pixels.height != kTileSize || pixels.channels != 3) {
    cache.erase(key);
    throw IntegrityError(strf("provider payload is %dx%dx%d, expected %dx%dx3", pixels.width,
                              pixels.height, pixels.channels, kTileSize, kTileSize));
  }
  ImageTile tile;
  tile.tile_id = strf("%s_%02d", p.owner_id.c_str(), p.index);
  tile.owner_id = p.owner_id;
  tile.index = p.index;
  tile.pixels = std::move(pixels);
  tile.scene_id = scene.scene_id;
  tile.timestamp = scene.timestamp;
  cache.write(key, tile, p.lat, p.lon, zoom);
  if (was_cached) *was_cached = false;
  return tile;
}

long AcquisitionReport::count(const std::string& status) const {
  return static_cast<long>(
      std::count_if(rows.begin(), rows.end(), [&](const auto& r) { return r.status == status; }));
}

void AcquisitionReport::write_csv(const std::string& path) const {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({r.owner_id, strf("%d", r.index), r.status, r.scene_id, r.message});
  }
  demandmap::write_csv(path, {"owner_id", "index", "status", "scene_id", "message"}, out);
}

std::pair<std::vector<ImageTile>, AcquisitionReport> acquire_all(
    TileProvider& provider, TileCache& cache, const std::vector<geo::SamplePoint>& points,
    const SceneQuery& q, int max_inflight) {
  if (max_inflight < 1) throw ArgumentError("acquire_all: max_inflight must be >= 1");

  struct Slot {
    std::optional<ImageTile> tile;
    AcquisitionRow row;
  };
  std::vector<Slot> slots(points.size());

  auto work = [&](size_t i) {
    const geo::SamplePoint& p = points[i];
    Slot& slot = slots[i];
    slot.row.owner_id = p.owner_id;
    slot.row.index = p.index;
    try {
      // A warm cache answers without touching the provider at all.
      if (auto entry = cache.find_by_point(p.lat, p.lon, q.zoom)) {
        if (entry->timestamp >= q.start_ts && entry->timestamp <= q.end_ts) {
          if (auto tile = cache.read(entry->key)) {
            tile->tile_id = strf("%s_%02d", p.owner_id.c_str(), p.index);
            tile->owner_id = p.owner_id;
            tile->index = p.index;
            slot.tile = std::move(tile);
            slot.row.status = "cached";
            slot.row.scene_id = entry->scene_id;
            return;
          }
        }
      }
      SceneQuery pq = q;
      pq.point = geo::LatLon{p.lat, p.lon};
      pq.box.reset();
      auto scenes = query_scenes(provider, pq);
      if (scenes.empty()) {
        slot.row.status = "no_scene";
        slot.row.message = "no admissible scene (cloud/date filters)";
        return;
      }
      SceneMeta scene = select_latest(scenes);
      bool was_cached = false;
      ImageTile tile = fetch_tile(provider, cache, scene, p, q.zoom, &was_cached);
      slot.row.status = was_cached ? "cached" : "fetched";
      slot.row.scene_id = scene.scene_id;
      slot.tile = std::move(tile);
    } catch (const Error& e) {
      slot.row.status = "error";
      slot.row.message = e.what();
    }
  };

  if (max_inflight == 1 || points.size() <= 1) {
    for (size_t i = 0; i < points.size(); ++i) work(i);
  } else {
    std::atomic<size_t> next{0};
    auto runner = [&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= points.size()) return;
        work(i);
      }
    };
    size_t n_threads = std::min<size_t>(static_cast<size_t>(max_inflight), points.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(runner);
    for (auto& t : threads) t.join();
  }

  // Deterministic order regardless of thread interleaving.
  std::vector<size_t> order(points.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (points[a].owner_id != points[b].owner_id) return points[a].owner_id < points[b].owner_id;
    return points[a].index < points[b].index;
  });

  std::vector<ImageTile> tiles;
  AcquisitionReport report;
  for (size_t i : order) {
    if (slots[i].tile.has_value()) tiles.push_back(std::move(*slots[i].tile));
    report.rows.push_back(std::move(slots[i].row));
  }
  return {std::move(tiles), std::move(report)};
}

}  // namespace demandmap::imagery
