#include <unistd.h>

#include <ctime>
#include <filesystem>

#include <json.hpp>

#include "demandmap/pipeline.hpp"

namespace demandmap::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

RunManifest RunManifest::load_or_create(const PipelineConfig& config) {
  RunManifest m;
  m.dir_ = config.output_dir;
  m.config_hash_ = config.config_hash;
  m.seed_ = config.seed;
  fs::create_directories(m.dir_);
  std::string path = m.path();
  if (!fs::exists(path)) return m;
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error&) {
    return m;  // unreadable manifest: treat the run as fresh
  }
  if (doc.value("config_hash", std::string()) != to_hex(config.config_hash)) {
    return m;  // different configuration invalidates all stage records
  }
  for (auto& [name, rec] : doc.value("stages", json::object()).items()) {
    StageRecord sr;
    sr.input_signature = std::stoull(rec.value("input_signature", std::string("0")), nullptr, 16);
    sr.seconds = rec.value("seconds", 0.0);
    sr.completed_at = rec.value("completed_at", "");
    for (auto& [file, sum] : rec.value("outputs", json::object()).items()) {
      sr.outputs[file] = std::stoull(sum.get<std::string>(), nullptr, 16);
    }
    m.stages_[name] = std::move(sr);
  }
  for (auto& [name, value] : doc.value("counters", json::object()).items()) {
    m.counters_[name] = value.get<long>();
  }
  return m;
}

std::string RunManifest::path() const { return (fs::path(dir_) / "run_manifest.json").string(); }

void RunManifest::save() const {
  json stages = json::object();
  for (const auto& [name, rec] : stages_) {
    json outputs = json::object();
    for (const auto& [file, sum] : rec.outputs) outputs[file] = to_hex(sum);
    stages[name] = {{"input_signature", to_hex(rec.input_signature)},
                    {"outputs", outputs},
                    {"seconds", rec.seconds},
                    {"completed_at", rec.completed_at}};
  }
  json counters = json::object();
  for (const auto& [name, value] : counters_) counters[name] = value;
  json doc = {{"format_version", 1},
              {"config_hash", to_hex(config_hash_)},
              {"seed", seed_},
              {"stages", stages},
              {"counters", counters}};
  write_text_file(path(), doc.dump(1));
}

bool RunManifest::stage_is_current(const std::string& stage, uint64_t input_signature) const {
  auto it = stages_.find(stage);
  if (it == stages_.end()) return false;
  if (it->second.input_signature != input_signature) return false;
  for (const auto& [file, sum] : it->second.outputs) {
    std::string full = (fs::path(dir_) / file).string();
    if (!fs::exists(full)) return false;
    if (fnv1a64_file(full) != sum) return false;
  }
  return true;
}

void RunManifest::record_stage(const std::string& stage, uint64_t input_signature,
                               const std::vector<std::string>& output_paths, double seconds) {
  StageRecord rec;
  rec.input_signature = input_signature;
  rec.seconds = seconds;
  rec.completed_at = format_iso8601(static_cast<int64_t>(::time(nullptr)));
  for (const auto& p : output_paths) {
    std::string rel = fs::relative(p, dir_).string();
    rec.outputs[rel] = fnv1a64_file(p);
  }
  stages_[stage] = std::move(rec);
}

void RunManifest::set_counter(const std::string& name, long value) { counters_[name] = value; }

long RunManifest::counter(const std::string& name, long fallback) const {
  auto it = counters_.find(name);
  return it == counters_.end() ? fallback : it->second;
}

OutputLock::OutputLock(const std::string& output_dir) {
  fs::create_directories(output_dir);
  lock_path_ = (fs::path(output_dir) / ".lock").string();
  // O_EXCL-style create; an existing lock means another run owns the dir.
  if (fs::exists(lock_path_)) {
    throw ConfigError("output directory is locked by another run: " + lock_path_ +
                      " (remove the file if that run is gone)");
  }
  write_text_file(lock_path_, strf("pid=%d\n", static_cast<int>(::getpid())));
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(lock_path_, ec);
}

}  // namespace demandmap::pipeline
