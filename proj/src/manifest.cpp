#include "ganda/manifest.hpp"

#include <fstream>

#include "ganda/errors.hpp"
#include "ganda/evaluation.hpp"
#include "ganda/models.hpp"

#ifndef GANDA_VERSION
#define GANDA_VERSION "0.0.0"
#endif

namespace ganda {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view tool_version() { return GANDA_VERSION; }

void to_json(json& j, const DatasetSpec& d) {
  j = json{{"kind", d.kind}};
  if (d.kind == "moons") {
    j["n_per_class"] = d.moons.n_per_class;
    j["noise"] = d.moons.noise_sigma;
    j["rotation"] = d.moons.rotation_degrees;
    j["seed"] = d.moons.seed;
  } else {
    j["source"] = d.source_csv;
    j["target"] = d.target_csv;
    j["class_count"] = d.class_count;
  }
}

void from_json(const json& j, DatasetSpec& d) {
  d.kind = j.at("kind").get<std::string>();
  if (d.kind == "moons") {
    d.moons.n_per_class = j.at("n_per_class").get<int>();
    d.moons.noise_sigma = j.at("noise").get<double>();
    d.moons.rotation_degrees = j.at("rotation").get<double>();
    d.moons.seed = j.at("seed").get<std::uint64_t>();
  } else if (d.kind == "csv") {
    d.source_csv = j.at("source").get<std::string>();
    d.target_csv = j.at("target").get<std::string>();
    d.class_count = j.value("class_count", 0);
  } else {
    throw ConfigError("unknown dataset kind '" + d.kind + "'");
  }
}

DomainPair materialize(const DatasetSpec& spec, const fs::path& base_dir) {
  if (spec.kind == "moons") return make_rotated_moons(spec.moons);
  if (spec.kind != "csv") throw ConfigError("unknown dataset kind '" + spec.kind + "'");
  std::optional<int> classes;
  if (spec.class_count > 0) classes = spec.class_count;
  return load_feature_csv(base_dir / spec.source_csv, base_dir / spec.target_csv, classes);
}

void to_json(json& j, const RunManifest& m) {
  json history = json::array();
  for (const auto& r : m.history) history.push_back(json::parse(history_line(r)));
  j = json{{"tool_version", m.tool_version},
           {"config", m.config},
           {"dataset", m.dataset},
           {"history", history},
           {"final_source_accuracy", m.final_source_accuracy},
           {"final_target_accuracy", m.final_target_accuracy},
           {"diverged", m.diverged},
           {"divergence_message", m.divergence_message},
           {"artifacts", m.artifacts}};
}

void from_json(const json& j, RunManifest& m) {
  m.tool_version = j.at("tool_version").get<std::string>();
  m.config = j.at("config").get<TrainConfig>();
  m.dataset = j.at("dataset").get<DatasetSpec>();
  m.history.clear();
  for (const auto& r : j.at("history")) m.history.push_back(parse_history_line(r.dump()));
  m.final_source_accuracy = j.at("final_source_accuracy").get<double>();
  m.final_target_accuracy = j.at("final_target_accuracy").get<double>();
  m.diverged = j.at("diverged").get<bool>();
  m.divergence_message = j.at("divergence_message").get<std::string>();
  m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
}

void save_manifest(const RunManifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << json(m).dump(2) << '\n';
}

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  try {
    return json::parse(in).get<RunManifest>();
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void copy_input(const fs::path& from, const fs::path& to) {
  if (fs::exists(to) && fs::equivalent(from, to)) return;
  fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

}  // namespace

RunOutcome run_experiment(const DatasetSpec& data, const fs::path& data_dir, const TrainConfig& cfg,
                          const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);

  RunOutcome outcome;
  outcome.pair = materialize(data, data_dir);
  RunManifest& m = outcome.manifest;
  m.tool_version = std::string(tool_version());
  m.config = cfg;
  m.dataset = data;

  if (data.kind == "csv") {
    copy_input(data_dir / data.source_csv, out_dir / "source.csv");
    copy_input(data_dir / data.target_csv, out_dir / "target.csv");
    m.dataset.source_csv = "source.csv";
    m.dataset.target_csv = "target.csv";
  } else {
    const DomainPair& p = outcome.pair;
    write_labeled_csv(out_dir / "source.csv", p.source.features, p.source.labels);
    write_labeled_csv(out_dir / "target.csv", p.target_features, reveal_for_evaluation(p.target_labels));
  }
  m.artifacts["source_data"] = "source.csv";
  m.artifacts["target_data"] = "target.csv";

  write_text(out_dir / "config.json", json(cfg).dump(2) + "\n");
  m.artifacts["config"] = "config.json";

  FitOptions opts;
  opts.history_path = out_dir / "history.jsonl";
  outcome.fit = fit(outcome.pair, cfg, opts);
  m.artifacts["history"] = "history.jsonl";

  save_bundle(outcome.fit.bundle, out_dir / "model.json");
  m.artifacts["model"] = "model.json";

  if (outcome.pair.source.dim() != 2) {
    write_text(out_dir / "embedding.svg", render_embedding_svg(outcome.fit.bundle, outcome.pair));
    m.artifacts["embedding_plot"] = "embedding.svg";
  }

  m.history = outcome.fit.history;
  if (!m.history.empty()) {
    m.final_source_accuracy = m.history.back().acc_source;
    m.final_target_accuracy = m.history.back().acc_target;
  }
  m.diverged = outcome.fit.diverged;
  m.divergence_message = outcome.fit.divergence_message;
  m.artifacts["manifest"] = "manifest.json";
  save_manifest(m, out_dir / "manifest.json");
  return outcome;
}

RunOutcome rerun_manifest(const fs::path& manifest_path, const fs::path& out_dir) {
  const RunManifest m = load_manifest(manifest_path);
  return run_experiment(m.dataset, manifest_path.parent_path(), m.config, out_dir);
}

}  // namespace ganda
