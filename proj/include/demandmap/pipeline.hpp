#ifndef DEMANDMAP_PIPELINE_HPP_
#define DEMANDMAP_PIPELINE_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "demandmap/cnn/saliency.hpp"
#include "demandmap/cnn/train.hpp"
#include "demandmap/imagery.hpp"
#include "demandmap/keyval.hpp"
#include "demandmap/labeling.hpp"
#include "demandmap/regress.hpp"

namespace demandmap::pipeline {

// Flat key=value configuration with section prefixes; unknown keys are
// rejected so typos fail loudly. Relative paths resolve against the config
// file's directory.
struct PipelineConfig {
  std::string config_path;
  uint64_t config_hash = 0;

  std::string country;
  uint64_t seed = 42;
  std::vector<std::string> metrics = {"penetration", "spend"};

  // paths
  std::string survey_manifest;
  std::string boundary_path;
  std::string pop_raster_path;
  std::string nightlight_raster_path;
  std::string output_dir;
  std::string cache_dir;

  // provider
  std::string provider_kind = "mock";  // mock | http
  imagery::HttpProviderConfig http;
  std::string mock_field_raster;
  uint64_t mock_seed = 7;
  std::optional<geo::BBox> mock_cloud_hole;

  // download
  int max_inflight = 8;
  double max_cloud = 0.05;
  int zoom = 14;
  int64_t start_ts = 0;
  int64_t end_ts = 0;
  int points_per_owner = 20;

  // split / cross-validation
  labeling::SplitKind split_kind = labeling::SplitKind::random30;
  double holdout_fraction = 0.30;
  std::string holdout_country;
  std::vector<double> lambda_grid;

  // training
  cnn::TrainingConfig train;
  double width_scale = 1.0;
  std::string weights_path;

  // gridding
  double cell_km = 10.0;
  double min_population = 50.0;

  // explain
  cnn::SaliencyMode explain_mode = cnn::SaliencyMode::paper;

  static PipelineConfig load(const std::string& path,
                             std::optional<uint64_t> seed_override = std::nullopt);

  imagery::SceneQuery scene_query() const;
  std::string out(const std::string& relative) const;
};

std::unique_ptr<imagery::TileProvider> make_provider(const PipelineConfig& config);

// Per-run record of stage signatures, output checksums and timings. A stage
// whose input signature and outputs both match the manifest is skipped.
class RunManifest {
 public:
  static RunManifest load_or_create(const PipelineConfig& config);
  void save() const;

  bool stage_is_current(const std::string& stage, uint64_t input_signature) const;
  void record_stage(const std::string& stage, uint64_t input_signature,
                    const std::vector<std::string>& output_paths, double seconds);
  void set_counter(const std::string& name, long value);
  long counter(const std::string& name, long fallback = -1) const;

  std::string path() const;

 private:
  std::string dir_;
  uint64_t config_hash_ = 0;
  uint64_t seed_ = 0;
  struct StageRecord {
    uint64_t input_signature = 0;
    std::map<std::string, uint64_t> outputs;  // path (relative to out dir) -> checksum
    double seconds = 0.0;
    std::string completed_at;
  };
  std::map<std::string, StageRecord> stages_;
  std::map<std::string, long> counters_;
};

// Exclusive ownership of the output directory for the duration of a stage.
class OutputLock {
 public:
  explicit OutputLock(const std::string& output_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string lock_path_;
};

struct StageResult {
  std::string name;
  bool skipped = false;
  double seconds = 0.0;
  std::map<std::string, std::string> info;
};

StageResult run_ingest(const PipelineConfig& config);
StageResult run_fetch(const PipelineConfig& config);
StageResult run_train(const PipelineConfig& config);
StageResult run_fit(const PipelineConfig& config);
StageResult run_gridmap(const PipelineConfig& config);
StageResult run_explain(const PipelineConfig& config, const std::vector<std::string>& tile_ids,
                        int target_class, const std::string& metric);
std::vector<StageResult> run_all(const PipelineConfig& config);

// Minimal static-plot emitters so the report CSV / GeoJSON render without
// external tooling.
void write_scatter_svg(const std::string& path, const regress::MetricReport& report,
                       const std::string& title);
void write_choropleth_svg(const std::string& path, const std::vector<geo::GridCell>& cells,
                          const std::string& metric, const std::string& title);

}  // namespace demandmap::pipeline

#endif  // DEMANDMAP_PIPELINE_HPP_
