#ifndef DEMANDMAP_IMAGERY_HPP_
#define DEMANDMAP_IMAGERY_HPP_

#include <array>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "demandmap/common.hpp"
#include "demandmap/geo.hpp"
#include "demandmap/png_io.hpp"

namespace demandmap::imagery {

inline constexpr int kTileSize = 256;

struct SceneQuery {
  std::optional<geo::LatLon> point;
  std::optional<geo::BBox> box;
  int64_t start_ts = 1388534400;  // 2014-01-01T00:00:00Z
  int64_t end_ts = 1483228799;    // 2016-12-31T23:59:59Z
  double max_cloud_fraction = 0.05;
  int zoom = 14;
};

struct SceneMeta {
  std::string scene_id;
  int64_t timestamp = 0;
  double cloud_fraction = 0.0;
  geo::BBox footprint;
};

struct ImageTile {
  std::string tile_id;  // "<owner>_<index>"
  std::string owner_id;
  int index = 0;
  ImageBuf pixels;  // 256x256x3 RGB
  std::string scene_id;
  int64_t timestamp = 0;
};

// Scene listing + tile download seam. The paper-era commercial API stays
// behind this interface; tests and synthetic runs use the mock.
class TileProvider {
 public:
  virtual ~TileProvider() = default;
  virtual std::string id() const = 0;
  // Raw candidates; filtering/sorting is done by query_scenes.
  virtual std::vector<SceneMeta> list_scenes(const SceneQuery& q) = 0;
  // 256x256 RGB tile centred on (lat, lon) at the given zoom.
  virtual ImageBuf download(const SceneMeta& scene, double lat, double lon, int zoom) = 0;
};

// Scenes satisfying the cloud threshold and date range, ascending by
// (timestamp, scene_id).
std::vector<SceneMeta> query_scenes(TileProvider& provider, const SceneQuery& q);

// Maximum timestamp; ties break toward the lexicographically smallest id.
SceneMeta select_latest(const std::vector<SceneMeta>& scenes);

// Deterministic provider rendering pixels from a callback; scenes and their
// per-point cloud behaviour are configurable. Counters expose how often the
// provider was actually hit, for cache-contract tests.
class MockProvider : public TileProvider {
 public:
  using PixelFn = std::function<void(double lat, double lon, int zoom, ImageBuf& tile)>;

  MockProvider(std::string id, std::vector<SceneMeta> scenes, PixelFn pixels);
  static std::unique_ptr<MockProvider> constant_gray(uint8_t value);

  std::string id() const override { return id_; }
  std::vector<SceneMeta> list_scenes(const SceneQuery& q) override;
  ImageBuf download(const SceneMeta& scene, double lat, double lon, int zoom) override;

  // Points inside this box see every scene fully clouded (no admissible
  // scene), emulating a permanently obscured area.
  void set_cloud_hole(const geo::BBox& hole) { cloud_hole_ = hole; }
  // Forces a wrong-sized payload, for integrity-error tests.
  void set_corrupt_dimensions(bool corrupt) { corrupt_dimensions_ = corrupt; }

  long query_count() const { return query_count_.load(); }
  long download_count() const { return download_count_.load(); }

 private:
  std::string id_;
  std::vector<SceneMeta> scenes_;
  PixelFn pixels_;
  std::optional<geo::BBox> cloud_hole_;
  bool corrupt_dimensions_ = false;
  std::atomic<long> query_count_{0};
  std::atomic<long> download_count_{0};
};

// Generic HTTP tile provider: GET on a URL template with {lat}, {lon},
// {zoom}, {scene} placeholders returning a 256x256 RGB PNG. An optional
// scenes URL returns a JSON array of {scene_id, timestamp, cloud_fraction,
// footprint:[min_lat,max_lat,min_lon,max_lon]}; without it a single synthetic
// full-coverage scene is assumed. Transient failures retry 3 times with
// jittered exponential backoff; 401/403 raise CredentialError immediately.
struct HttpProviderConfig {
  std::string url_template;
  std::string auth_env;    // name of the env var holding the bearer token
  std::string scenes_url;  // optional
  int retry_base_ms = 1000;
};

class HttpTileProvider : public TileProvider {
 public:
  explicit HttpTileProvider(HttpProviderConfig config);
  std::string id() const override;
  std::vector<SceneMeta> list_scenes(const SceneQuery& q) override;
  ImageBuf download(const SceneMeta& scene, double lat, double lon, int zoom) override;

 private:
  std::vector<uint8_t> get_with_retries(const std::string& url);
  HttpProviderConfig config_;
};

// Content-addressed tile store: <key>.png plus a key=value sidecar with
// scene_id, timestamp, lat, lon, zoom. Safe for concurrent writers to
// distinct keys; writers to one key serialize on a shard mutex.
class TileCache {
 public:
  explicit TileCache(std::string dir);

  static std::string make_key(const std::string& provider_id, const std::string& scene_id,
                              double lat, double lon, int zoom);

  bool has(const std::string& key) const;
  std::optional<ImageTile> read(const std::string& key) const;
  void write(const std::string& key, const ImageTile& tile, double lat, double lon, int zoom);
  void erase(const std::string& key);

  struct PointEntry {
    std::string key;
    std::string scene_id;
    int64_t timestamp;
  };
  // Lookup by sample point, via an index over the sidecars.
  std::optional<PointEntry> find_by_point(double lat, double lon, int zoom) const;

  const std::string& dir() const { return dir_; }
  std::string png_path(const std::string& key) const;
  std::string meta_path(const std::string& key) const;

 private:
  static std::string point_key(double lat, double lon, int zoom);
  void index_existing();

  std::string dir_;
  mutable std::mutex index_mutex_;
  std::map<std::string, PointEntry> point_index_;
  static constexpr int kShards = 64;
  mutable std::array<std::mutex, kShards> shard_mutex_;
};

// Coverage-checked, cache-through fetch. Wrong-sized payloads raise
// IntegrityError and purge the cache entry.
ImageTile fetch_tile(TileProvider& provider, TileCache& cache, const SceneMeta& scene,
                     const geo::SamplePoint& p, int zoom = 14, bool* was_cached = nullptr);

struct AcquisitionRow {
  std::string owner_id;
  int index = 0;
  std::string status;  // fetched | cached | no_scene | error
  std::string scene_id;
  std::string message;
};

struct AcquisitionReport {
  std::vector<AcquisitionRow> rows;

  long count(const std::string& status) const;
  long downloads() const { return count("fetched"); }
  long failures() const { return count("no_scene") + count("error"); }
  void write_csv(const std::string& path) const;
};

// Best-effort tile per point (query -> latest -> fetch), at most max_inflight
// concurrent downloads, output ordered by (owner_id, index). Failures land in
// the report instead of throwing.
std::pair<std::vector<ImageTile>, AcquisitionReport> acquire_all(
    TileProvider& provider, TileCache& cache, const std::vector<geo::SamplePoint>& points,
    const SceneQuery& q, int max_inflight = 8);

}  // namespace demandmap::imagery

#endif  // DEMANDMAP_IMAGERY_HPP_
