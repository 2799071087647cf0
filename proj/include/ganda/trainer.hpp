#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ganda/datasets.hpp"
#include "ganda/diffcore.hpp"
#include "ganda/models.hpp"
#include "ganda/pfr.hpp"

namespace ganda {

// The full method and its four ablations. CDAN drops the target alignment
// term; the GAN_* variants change the shared/orthogonal target blocks.
enum class Variant { GanDa, Cdan, GanCfr, GanOfr, GanFix };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);
const std::vector<Variant>& all_variants();
std::optional<PfrVariant> pfr_variant(Variant v);

struct TrainConfig {
  Variant variant = Variant::GanDa;
  int epochs = 30;
  int batch_size = 8;
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lambda_align = 1.0;
  double lambda_adv = 1.0;
  double pseudo_conf_threshold = 0.0;
  int sched_epochs = 3;
  std::uint64_t seed = 0;
  int embed_dim = 15;
  int hidden = 16;
  double dropout = 0.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_config(const std::filesystem::path& path);

struct EpochReport {
  int epoch = 0;
  double loss_ce = 0.0;
  double loss_align = 0.0;
  double loss_adv_disc = 0.0;
  double acc_source = 0.0;
  double acc_target = 0.0;
  double mean_embed_norm = 0.0;
  double seconds = 0.0;
};

// One JSON object per line. Wall time is left out so the history is a pure
// function of config, data and seed.
std::string history_line(const EpochReport& r);
EpochReport parse_history_line(std::string_view line);

struct PseudoLabels {
  std::vector<int> labels;
  std::vector<bool> mask;
  // labels with masked-out rows replaced by -1
  std::vector<int> masked() const;
};

// Argmax of the row softmax (ties to the lower index); mask = max prob >= tau.
PseudoLabels pseudo_labels(const Matrix& logits, double tau);

struct StepLosses {
  double ce = 0.0;
  double align = 0.0;
  double disc = 0.0;
};

struct TrainerState {
  SgdState model_opt;
  SgdState disc_opt;
  double grl_coeff = 0.0;
  std::mt19937_64 dropout_rng;
};

TrainerState make_trainer_state(const TrainConfig& cfg);

// One forward pass over the stacked source+target batch, one backward pass of
// CE + lambda_align * alignment + lambda_adv * domain BCE, then one SGD step for
// generator+classifier and one for the discriminator. `targets` == nullptr
// skips the alignment term.
StepLosses train_step(ModelBundle& bundle, const Batch& batch, const PfrTargets* targets,
                      const TrainConfig& cfg, TrainerState& state);

struct FitResult {
  ModelBundle bundle;
  std::vector<EpochReport> history;
  bool diverged = false;
  std::string divergence_message;
};

struct FitOptions {
  std::optional<std::filesystem::path> history_path;
  std::function<void(const EpochReport&)> on_epoch;
};

FitResult fit(const DomainPair& pair, const TrainConfig& cfg, const FitOptions& opts = {});

}  // namespace ganda
