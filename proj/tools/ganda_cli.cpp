#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ganda/ablation.hpp"
#include "ganda/datasets.hpp"
#include "ganda/errors.hpp"
#include "ganda/evaluation.hpp"
#include "ganda/gradcheck.hpp"
#include "ganda/manifest.hpp"
#include "ganda/models.hpp"
#include "ganda/trainer.hpp"

namespace fs = std::filesystem;
using namespace ganda;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDiverged = 3;

struct DataArgs {
  std::string data_dir;
  std::string source;
  std::string target;
  int class_count = 0;
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
  auto* dir = cmd->add_option("--data", d.data_dir, "directory holding source.csv and target.csv");
  auto* src = cmd->add_option("--source", d.source, "labelled source CSV");
  auto* tgt = cmd->add_option("--target", d.target, "target CSV (labels used for evaluation only)");
  cmd->add_option("--class-count", d.class_count, "number of classes (default: 1 + max source label)");
  dir->excludes(src)->excludes(tgt);
  src->needs(tgt);
  tgt->needs(src);
}

// Moons with the given seed unless files were named.
DatasetSpec dataset_from(const DataArgs& d, std::uint64_t moons_seed, fs::path& base_dir) {
  DatasetSpec spec;
  if (!d.data_dir.empty()) {
    spec.kind = "csv";
    base_dir = d.data_dir;
    spec.source_csv = "source.csv";
    spec.target_csv = "target.csv";
  } else if (!d.source.empty()) {
    spec.kind = "csv";
    base_dir = ".";
    spec.source_csv = d.source;
    spec.target_csv = d.target;
  } else {
    spec.moons.seed = moons_seed;
    base_dir = ".";
  }
  spec.class_count = d.class_count;
  return spec;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

std::vector<Variant> parse_variants(const std::string& text) {
  if (text == "all") return all_variants();
  std::vector<Variant> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(variant_from_string(item));
  if (out.empty()) throw ConfigError("no variants given");
  return out;
}

void print_report(const EpochReport& r) {
  std::printf("epoch %3d  ce %.4f  align %.4g  disc %.4f  acc_src %.4f  acc_tgt %.4f  |F| %.4g  %.2fs\n",
              r.epoch, r.loss_ce, r.loss_align, r.loss_adv_disc, r.acc_source, r.acc_target,
              r.mean_embed_norm, r.seconds);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

int finish_run(const RunOutcome& outcome) {
  for (const auto& r : outcome.fit.history) print_report(r);
  std::printf("final acc_source %.4f acc_target %.4f\n", outcome.manifest.final_source_accuracy,
              outcome.manifest.final_target_accuracy);
  if (outcome.fit.diverged) {
    std::fprintf(stderr, "diverged: %s\n", outcome.fit.divergence_message.c_str());
    return kDiverged;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAN-DA domain adaptation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic source/target pair as CSV");
  std::string gen_kind;
  MoonsOptions moons;
  std::string gen_out;
  gen->add_option("kind", gen_kind, "dataset kind")->required()->check(CLI::IsMember({"moons"}));
  gen->add_option("--n-per-class", moons.n_per_class)->check(CLI::PositiveNumber);
  gen->add_option("--rotation", moons.rotation_degrees);
  gen->add_option("--noise", moons.noise_sigma)->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", moons.seed);
  gen->add_option("--out", gen_out, "output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "train one model and write its run directory");
  std::string run_config, run_out;
  DataArgs run_data;
  run->add_option("--config", run_config, "TrainConfig JSON")->required();
  run->add_option("--out", run_out, "run directory")->required();
  add_data_options(run, run_data);

  // rerun
  auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest and compare final accuracies");
  std::string rerun_manifest_path, rerun_out;
  rerun->add_option("--manifest", rerun_manifest_path)->required();
  rerun->add_option("--out", rerun_out, "new run directory")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train every variant for every seed and tabulate target accuracy");
  std::string ablate_config, ablate_out, ablate_variants = "all", ablate_seeds = "0,1,2,3,4";
  int ablate_workers = 1;
  DataArgs ablate_data;
  ablate->add_option("--config", ablate_config, "base TrainConfig JSON")->required();
  ablate->add_option("--variants", ablate_variants, "'all' or a comma list");
  ablate->add_option("--seeds", ablate_seeds, "comma list");
  ablate->add_option("--out", ablate_out, "output directory")->required();
  ablate->add_option("--workers", ablate_workers, "concurrent fits")->check(CLI::PositiveNumber);
  add_data_options(ablate, ablate_data);

  // export-boundary
  auto* exportb = app.add_subcommand("export-boundary", "render the decision boundary of a 2-D run as SVG");
  std::string export_run, export_out;
  int export_res = 200;
  exportb->add_option("--run", export_run, "run directory")->required();
  exportb->add_option("--resolution", export_res)->check(CLI::Range(2, 4000));
  exportb->add_option("--out", export_out, "SVG path; the grid CSV is written next to it")->required();

  // grad-check
  auto* gradc = app.add_subcommand("grad-check", "compare analytic gradients against central differences");
  std::uint64_t grad_seed = 0;
  GradCheckOptions grad_opts;
  gradc->add_option("--seed", grad_seed);
  gradc->add_option("--configs", grad_opts.configs)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      const DomainPair pair = make_rotated_moons(moons);
      fs::create_directories(gen_out);
      write_labeled_csv(fs::path(gen_out) / "source.csv", pair.source.features, pair.source.labels);
      write_labeled_csv(fs::path(gen_out) / "target.csv", pair.target_features,
                        reveal_for_evaluation(pair.target_labels));
      std::printf("wrote %zu source and %zu target rows to %s\n", pair.source.size(),
                  pair.target_features.rows, gen_out.c_str());
      return kOk;
    }

    if (*run) {
      const TrainConfig cfg = load_config(run_config);
      fs::path base;
      const DatasetSpec spec = dataset_from(run_data, cfg.seed, base);
      return finish_run(run_experiment(spec, base, cfg, run_out));
    }

    if (*rerun) {
      const RunManifest before = load_manifest(rerun_manifest_path);
      const RunOutcome after = rerun_manifest(rerun_manifest_path, rerun_out);
      const int status = finish_run(after);
      const bool same = before.final_source_accuracy == after.manifest.final_source_accuracy &&
                        before.final_target_accuracy == after.manifest.final_target_accuracy;
      std::printf("reproduced: %s\n", same ? "yes" : "no");
      return status != kOk ? status : (same ? kOk : 1);
    }

    if (*ablate) {
      const TrainConfig cfg = load_config(ablate_config);
      const std::vector<Variant> variants = parse_variants(ablate_variants);
      const std::vector<std::uint64_t> seeds = parse_seeds(ablate_seeds);
      DataFactory data;
      if (ablate_data.data_dir.empty() && ablate_data.source.empty()) {
        data = [](std::uint64_t seed) {
          MoonsOptions m;
          m.seed = seed;
          return make_rotated_moons(m);
        };
      } else {
        fs::path base;
        const DatasetSpec spec = dataset_from(ablate_data, 0, base);
        const DomainPair pair = materialize(spec, base);
        data = [pair](std::uint64_t) { return pair; };
      }
      const AblationTable table = run_ablation(data, cfg, variants, seeds, AblationOptions{ablate_workers});
      fs::create_directories(ablate_out);
      write_file(fs::path(ablate_out) / "ablation.csv", table.to_csv());
      write_file(fs::path(ablate_out) / "ablation.txt", table.to_text());
      write_file(fs::path(ablate_out) / "config.json", nlohmann::json(cfg).dump(2) + "\n");
      std::fputs(table.to_text().c_str(), stdout);
      bool any_diverged = false;
      for (const auto& r : table.runs)
        if (r.diverged) {
          any_diverged = true;
          std::fprintf(stderr, "%s seed %llu diverged: %s\n", std::string(to_string(r.variant)).c_str(),
                       static_cast<unsigned long long>(r.seed), r.divergence_message.c_str());
        }
      return any_diverged ? kDiverged : kOk;
    }

    if (*exportb) {
      const fs::path run_dir(export_run);
      const RunManifest m = load_manifest(run_dir / "manifest.json");
      const DomainPair pair = materialize(m.dataset, run_dir);
      const ModelBundle bundle = load_bundle(run_dir / m.artifacts.at("model"));
      const BoundaryGrid grid = boundary_grid(bundle, pair, export_res);
      if (fs::path(export_out).has_parent_path()) fs::create_directories(fs::path(export_out).parent_path());
      export_plot(grid, pair, bundle.class_count, export_out);
      std::printf("wrote %s (%d x %d cells)\n", export_out.c_str(), export_res, export_res);
      return kOk;
    }

    if (*gradc) {
      const GradCheckReport report = grad_check(grad_seed, grad_opts);
      std::printf("%-14s %-14s %10s %8s %8s\n", "network", "term", "max_rel", "checked", "kinks");
      for (const auto& e : report.entries)
        std::printf("%-14s %-14s %10.3e %8zu %8zu\n", e.network.c_str(), e.term.c_str(), e.max_rel_error,
                    e.checked, e.skipped_kinks);
      const bool ok = report.passed(1e-5);
      std::printf("%s: max relative error %.3e over %d configurations\n", ok ? "PASS" : "FAIL",
                  report.max_rel_error(), report.configs);
      return ok ? kOk : 1;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kConfigError;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "numerical divergence: %s\n", e.what());
    return kDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
