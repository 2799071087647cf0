#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ganda/datasets.hpp"
#include "ganda/trainer.hpp"

namespace ganda {

std::string_view tool_version();

// Where the data of a run comes from. CSV paths are relative to the directory
// holding the manifest (a run copies its inputs next to the manifest).
struct DatasetSpec {
  std::string kind = "moons";  // "moons" or "csv"
  MoonsOptions moons;
  std::string source_csv;
  std::string target_csv;
  int class_count = 0;  // csv only; 0 = infer from source labels
};

void to_json(nlohmann::json& j, const DatasetSpec& d);
void from_json(const nlohmann::json& j, DatasetSpec& d);

DomainPair materialize(const DatasetSpec& spec, const std::filesystem::path& base_dir);

struct RunManifest {
  std::string tool_version;
  TrainConfig config;
  DatasetSpec dataset;
  std::vector<EpochReport> history;
  double final_source_accuracy = 0.0;
  double final_target_accuracy = 0.0;
  bool diverged = false;
  std::string divergence_message;
  std::map<std::string, std::string> artifacts;  // role -> path relative to the run directory
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);
void save_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

struct RunOutcome {
  RunManifest manifest;
  FitResult fit;
  DomainPair pair;
};

// Trains and writes config.json, history.jsonl, model.json, source.csv,
// target.csv, manifest.json (and embedding.svg for inputs that are not 2-D)
// into `out_dir`.
RunOutcome run_experiment(const DatasetSpec& data, const std::filesystem::path& data_dir,
                          const TrainConfig& cfg, const std::filesystem::path& out_dir);

// Re-runs the experiment recorded in `manifest_path` into `out_dir`.
RunOutcome rerun_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir);

}  // namespace ganda
