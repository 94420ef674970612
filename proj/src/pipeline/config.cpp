#include <filesystem>
#include <set>

#include "demandmap/pipeline.hpp"

namespace demandmap::pipeline {

namespace fs = std::filesystem;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "country", "seed", "metrics",
      "paths.survey_manifest", "paths.boundary", "paths.pop_raster", "paths.nightlight_raster",
      "paths.output_dir",
      "cache.dir",
      "provider.kind", "provider.url_template", "provider.auth_env", "provider.scenes_url",
      "provider.retry_base_ms",
      "mock.field_raster", "mock.seed",
      "mock.hole.min_lat", "mock.hole.max_lat", "mock.hole.min_lon", "mock.hole.max_lon",
      "download.max_inflight", "download.max_cloud", "download.zoom", "download.start",
      "download.end", "download.points_per_owner",
      "split.kind", "split.holdout_fraction", "split.holdout_country",
      "cv.lambda_grid",
      "train.width_scale", "train.learning_rate", "train.batch_size", "train.epochs_frozen",
      "train.epochs_full", "train.loss_alpha", "train.crop_size", "train.weights",
      "grid.cell_km", "grid.min_population",
      "explain.mode",
  };
  return keys;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path,
                                    std::optional<uint64_t> seed_override) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  KeyVal kv = read_keyval(path);
  for (const auto& [key, value] : kv) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key: " + key);
  }

  PipelineConfig c;
  c.config_path = path;
  fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    fs::path fp(p);
    return fp.is_relative() ? (base / fp).string() : p;
  };

  c.country = kv_get(kv, "country", "");
  c.seed = static_cast<uint64_t>(kv_get_int(kv, "seed", 42));
  if (seed_override.has_value()) c.seed = *seed_override;
  std::string metrics = kv_get(kv, "metrics", "penetration,spend");
  c.metrics.clear();
  for (const auto& m : split(metrics, ',')) {
    std::string t = trim(m);
    if (t.empty()) continue;
    if (t != "penetration" && t != "spend") throw ConfigError("unknown metric: " + t);
    c.metrics.push_back(t);
  }
  if (c.metrics.empty()) throw ConfigError("metrics list is empty");

  c.survey_manifest = resolve(kv_get(kv, "paths.survey_manifest", ""));
  c.boundary_path = resolve(kv_get(kv, "paths.boundary", ""));
  c.pop_raster_path = resolve(kv_get(kv, "paths.pop_raster", ""));
  c.nightlight_raster_path = resolve(kv_get(kv, "paths.nightlight_raster", ""));
  c.output_dir = resolve(kv_require(kv, "paths.output_dir", "config"));
  c.cache_dir = resolve(kv_get(kv, "cache.dir", (fs::path(c.output_dir) / "cache").string()));

  c.provider_kind = kv_get(kv, "provider.kind", "mock");
  if (c.provider_kind != "mock" && c.provider_kind != "http") {
    throw ConfigError("provider.kind must be mock or http");
  }
  c.http.url_template = kv_get(kv, "provider.url_template", "");
  c.http.auth_env = kv_get(kv, "provider.auth_env", "");
  c.http.scenes_url = kv_get(kv, "provider.scenes_url", "");
  c.http.retry_base_ms = static_cast<int>(kv_get_int(kv, "provider.retry_base_ms", 1000));
  c.mock_field_raster = resolve(kv_get(kv, "mock.field_raster", ""));
  c.mock_seed = static_cast<uint64_t>(kv_get_int(kv, "mock.seed", 7));
  if (kv.count("mock.hole.min_lat")) {
    geo::BBox hole;
    hole.min_lat = kv_get_double(kv, "mock.hole.min_lat", 0);
    hole.max_lat = kv_get_double(kv, "mock.hole.max_lat", 0);
    hole.min_lon = kv_get_double(kv, "mock.hole.min_lon", 0);
    hole.max_lon = kv_get_double(kv, "mock.hole.max_lon", 0);
    c.mock_cloud_hole = hole;
  }

  c.max_inflight = static_cast<int>(kv_get_int(kv, "download.max_inflight", 8));
  c.max_cloud = kv_get_double(kv, "download.max_cloud", 0.05);
  c.zoom = static_cast<int>(kv_get_int(kv, "download.zoom", 14));
  c.start_ts = parse_iso8601(kv_get(kv, "download.start", "2014-01-01T00:00:00Z"));
  c.end_ts = parse_iso8601(kv_get(kv, "download.end", "2016-12-31T23:59:59Z"));
  c.points_per_owner = static_cast<int>(kv_get_int(kv, "download.points_per_owner", 20));

  std::string split_kind = kv_get(kv, "split.kind", "random30");
  if (split_kind == "random30") c.split_kind = labeling::SplitKind::random30;
  else if (split_kind == "country_holdout") c.split_kind = labeling::SplitKind::country_holdout;
  else throw ConfigError("split.kind must be random30 or country_holdout");
  c.holdout_fraction = kv_get_double(kv, "split.holdout_fraction", 0.30);
  c.holdout_country = kv_get(kv, "split.holdout_country", "");

  std::string grid_spec = kv_get(kv, "cv.lambda_grid", "");
  if (grid_spec.empty()) {
    c.lambda_grid = regress::default_lambda_grid();
  } else {
    for (const auto& tok : split(grid_spec, ',')) {
      double v;
      if (!parse_double(tok, v)) throw ConfigError("cv.lambda_grid: not a number: " + tok);
      c.lambda_grid.push_back(v);
    }
  }

  c.width_scale = kv_get_double(kv, "train.width_scale", 1.0);
  c.train.learning_rate = kv_get_double(kv, "train.learning_rate", 3e-6);
  c.train.batch_size = static_cast<int>(kv_get_int(kv, "train.batch_size", 8));
  c.train.epochs_frozen = static_cast<int>(kv_get_int(kv, "train.epochs_frozen", 5));
  c.train.epochs_full = static_cast<int>(kv_get_int(kv, "train.epochs_full", 25));
  c.train.loss_alpha = kv_get_double(kv, "train.loss_alpha", 0.7);
  c.train.crop_size = static_cast<int>(kv_get_int(kv, "train.crop_size", 224));
  c.train.seed = c.seed;
  c.weights_path = resolve(kv_get(kv, "train.weights", ""));

  c.cell_km = kv_get_double(kv, "grid.cell_km", 10.0);
  c.min_population = kv_get_double(kv, "grid.min_population", 50.0);

  std::string mode = kv_get(kv, "explain.mode", "paper");
  if (mode == "paper") c.explain_mode = cnn::SaliencyMode::paper;
  else if (mode == "guided") c.explain_mode = cnn::SaliencyMode::guided;
  else throw ConfigError("explain.mode must be paper or guided");

  // Hash over the effective configuration (seed override included).
  std::vector<std::pair<std::string, std::string>> canonical(kv.begin(), kv.end());
  canonical.emplace_back("effective.seed", strf("%llu", static_cast<unsigned long long>(c.seed)));
  c.config_hash = fnv1a64(format_keyval(canonical));
  return c;
}

imagery::SceneQuery PipelineConfig::scene_query() const {
  imagery::SceneQuery q;
  q.start_ts = start_ts;
  q.end_ts = end_ts;
  q.max_cloud_fraction = max_cloud;
  q.zoom = zoom;
  return q;
}

std::string PipelineConfig::out(const std::string& relative) const {
  return (fs::path(output_dir) / relative).string();
}

std::unique_ptr<imagery::TileProvider> make_provider(const PipelineConfig& config) {
  if (config.provider_kind == "http") {
    return std::make_unique<imagery::HttpTileProvider>(config.http);
  }
  // Deterministic mock rendering tile brightness from a latent field raster.
  if (config.mock_field_raster.empty()) {
    throw ConfigError("provider.kind=mock requires mock.field_raster");
  }
  if (!fs::exists(config.mock_field_raster)) {
    throw ConfigError("mock.field_raster not found: " + config.mock_field_raster);
  }
  auto field = std::make_shared<geo::Raster>(geo::read_ascii_grid(config.mock_field_raster));
  double fmin = 1e300, fmax = -1e300;
  for (double v : field->values) {
    if (v == field->nodata) continue;
    fmin = std::min(fmin, v);
    fmax = std::max(fmax, v);
  }
  double fspan = fmax > fmin ? fmax - fmin : 1.0;
  uint64_t noise_seed = config.mock_seed;

  auto render = [field, fmin, fspan, noise_seed](double lat, double lon, int zoom, ImageBuf& tile) {
    // Ground resolution of a 256px web-map tile at this zoom.
    double tile_deg = 360.0 / static_cast<double>(1 << zoom);
    double px_deg = tile_deg / static_cast<double>(imagery::kTileSize);
    for (int y = 0; y < tile.height; ++y) {
      double plat = lat + (tile.height / 2.0 - y - 0.5) * px_deg;
      for (int x = 0; x < tile.width; ++x) {
        double plon = lon + (x - tile.width / 2.0 + 0.5) * px_deg;
        double v = 0.0;
        geo::BBox extent = field->bounds();
        if (extent.contains(plat, plon)) {
          int col = std::min(field->width - 1,
                             std::max(0, static_cast<int>((plon - field->origin_lon) /
                                                          field->pixel_size)));
          int row_from_bottom = std::min(
              field->height - 1,
              std::max(0, static_cast<int>((plat - field->origin_lat) / field->pixel_size)));
          double raw = field->at(field->height - 1 - row_from_bottom, col);
          if (raw != field->nodata) v = (raw - fmin) / fspan;
        }
        double base = 30.0 + 200.0 * v;
        uint64_t h = noise_seed;
        h = fnv1a64(strf("%d|%d|%.7f|%.7f", x, y, lat, lon), h);
        double noise = static_cast<double>(h % 21) - 10.0;
        auto channel = [&](double scale) {
          return static_cast<uint8_t>(std::clamp(base * scale + noise, 0.0, 255.0));
        };
        size_t at = (static_cast<size_t>(y) * tile.width + x) * 3;
        tile.pixels[at + 0] = channel(0.92);
        tile.pixels[at + 1] = channel(1.0);
        tile.pixels[at + 2] = channel(0.85);
      }
    }
  };

  std::vector<imagery::SceneMeta> scenes;
  auto add_scene = [&](const char* id, const char* ts, double cloud) {
    imagery::SceneMeta s;
    s.scene_id = id;
    s.timestamp = parse_iso8601(ts);
    s.cloud_fraction = cloud;
    s.footprint = geo::world_bbox();
    scenes.push_back(s);
  };
  add_scene("mock-2014", "2014-06-01T10:00:00Z", 0.02);
  add_scene("mock-2015", "2015-06-15T10:00:00Z", 0.04);
  add_scene("mock-2016", "2016-03-02T10:00:00Z", 0.01);

  auto provider = std::make_unique<imagery::MockProvider>("mock", std::move(scenes), render);
  if (config.mock_cloud_hole.has_value()) provider->set_cloud_hole(*config.mock_cloud_hole);
  return provider;
}

}  // namespace demandmap::pipeline
