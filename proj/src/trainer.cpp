#include "ganda/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ganda/errors.hpp"
#include "ganda/evaluation.hpp"
#include "ganda/losses.hpp"

namespace ganda {

using nlohmann::json;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::GanDa: return "GAN_DA";
    case Variant::Cdan: return "CDAN";
    case Variant::GanCfr: return "GAN_CFR";
    case Variant::GanOfr: return "GAN_OFR";
    case Variant::GanFix: return "GAN_FIX";
  }
  return "?";
}

Variant variant_from_string(std::string_view name) {
  for (Variant v : all_variants())
    if (to_string(v) == name) return v;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected GAN_DA, CDAN, GAN_CFR, GAN_OFR or GAN_FIX)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::GanDa, Variant::Cdan, Variant::GanCfr,
                                      Variant::GanOfr, Variant::GanFix};
  return v;
}

std::optional<PfrVariant> pfr_variant(Variant v) {
  switch (v) {
    case Variant::GanDa: return PfrVariant::Full;
    case Variant::Cdan: return std::nullopt;
    case Variant::GanCfr: return PfrVariant::NoCfr;
    case Variant::GanOfr: return PfrVariant::NoOfr;
    case Variant::GanFix: return PfrVariant::FixCfr;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(lambda_align >= 0.0) || !(lambda_adv >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (!(pseudo_conf_threshold >= 0.0 && pseudo_conf_threshold <= 1.0))
    throw ConfigError("pseudo_conf_threshold must be in [0, 1]");
  if (sched_epochs < 1) throw ConfigError("sched_epochs must be >= 1");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"variant", to_string(c.variant)},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"lambda_align", c.lambda_align},
           {"lambda_adv", c.lambda_adv},
           {"pseudo_conf_threshold", c.pseudo_conf_threshold},
           {"sched_epochs", c.sched_epochs},
           {"seed", c.seed},
           {"embed_dim", c.embed_dim},
           {"hidden", c.hidden},
           {"dropout", c.dropout}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::vector<std::string> known{
      "variant", "epochs", "batch_size", "lr", "momentum", "weight_decay", "lambda_align",
      "lambda_adv", "pseudo_conf_threshold", "sched_epochs", "seed", "embed_dim", "hidden", "dropout"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config field '" + key + "'");
  try {
    TrainConfig d;
    c.variant = variant_from_string(j.value("variant", std::string(to_string(d.variant))));
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr = j.value("lr", d.lr);
    c.momentum = j.value("momentum", d.momentum);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.lambda_align = j.value("lambda_align", d.lambda_align);
    c.lambda_adv = j.value("lambda_adv", d.lambda_adv);
    c.pseudo_conf_threshold = j.value("pseudo_conf_threshold", d.pseudo_conf_threshold);
    c.sched_epochs = j.value("sched_epochs", d.sched_epochs);
    c.seed = j.value("seed", d.seed);
    c.embed_dim = j.value("embed_dim", d.embed_dim);
    c.hidden = j.value("hidden", d.hidden);
    c.dropout = j.value("dropout", d.dropout);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j.get<TrainConfig>();
}

std::string history_line(const EpochReport& r) {
  json j{{"epoch", r.epoch},
         {"loss_ce", r.loss_ce},
         {"loss_align", r.loss_align},
         {"loss_adv_disc", r.loss_adv_disc},
         {"acc_source", r.acc_source},
         {"acc_target", r.acc_target},
         {"mean_embed_norm", r.mean_embed_norm}};
  return j.dump();
}

EpochReport parse_history_line(std::string_view line) {
  const json j = json::parse(line);
  EpochReport r;
  r.epoch = j.at("epoch").get<int>();
  r.loss_ce = j.at("loss_ce").get<double>();
  r.loss_align = j.at("loss_align").get<double>();
  r.loss_adv_disc = j.at("loss_adv_disc").get<double>();
  r.acc_source = j.at("acc_source").get<double>();
  r.acc_target = j.at("acc_target").get<double>();
  r.mean_embed_norm = j.at("mean_embed_norm").get<double>();
  return r;
}

std::vector<int> PseudoLabels::masked() const {
  std::vector<int> out(labels);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask[i]) out[i] = -1;
  return out;
}

PseudoLabels pseudo_labels(const Matrix& logits, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("pseudo_labels: tau must be in [0, 1]");
  PseudoLabels out{std::vector<int>(logits.rows), std::vector<bool>(logits.rows)};
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    // max softmax probability = 1 / sum_c exp(z_c - z_max)
    double z = 0.0;
    for (double v : row) z += std::exp(v - row[best]);
    out.labels[r] = static_cast<int>(best);
    out.mask[r] = 1.0 / z >= tau;
  }
  return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

}  // namespace

TrainerState make_trainer_state(const TrainConfig& cfg) {
  TrainerState s;
  s.model_opt = SgdState{cfg.lr, cfg.momentum, cfg.weight_decay, {}};
  s.disc_opt = SgdState{cfg.lr, cfg.momentum, cfg.weight_decay, {}};
  s.dropout_rng.seed(mix_seed(cfg.seed, 2));
  return s;
}

StepLosses train_step(ModelBundle& bundle, const Batch& batch, const PfrTargets* targets,
                      const TrainConfig& cfg, TrainerState& state) {
  const std::size_t ns = batch.source.size();
  const std::size_t nt = batch.target.rows;
  if (ns == 0 || nt == 0) throw ConfigError("train_step: empty batch");
  const std::size_t n = ns + nt;
  const bool use_disc = cfg.lambda_adv > 0.0;
  const bool use_align = targets != nullptr && cfg.lambda_align > 0.0;

  const DiffArray x = DiffArray::from_matrix(stack_rows(batch.source.features, batch.target));
  const ForwardResult fwd = forward_all(bundle, x, state.grl_coeff, use_disc, &state.dropout_rng);

  StepLosses out;
  DiffArray ce = cross_entropy(slice_rows(fwd.logits, 0, ns), batch.source.labels);
  out.ce = ce.item();
  DiffArray total = ce;

  if (use_align) {
    const DiffArray target_logits = slice_rows(fwd.logits, ns, n);
    const PseudoLabels pl = pseudo_labels(target_logits.to_matrix(), cfg.pseudo_conf_threshold);
    const std::vector<int> target_labels = pl.masked();
    DiffArray align = alignment_loss(slice_rows(fwd.features, 0, ns), batch.source.labels,
                                     slice_rows(fwd.features, ns, n), target_labels, *targets);
    out.align = align.item();
    total = add(total, mul_scalar(align, cfg.lambda_align));
  }
  if (use_disc) {
    DiffArray disc = adversarial_loss(slice_rows(fwd.domain_logits, 0, ns),
                                      slice_rows(fwd.domain_logits, ns, n));
    out.disc = disc.item();
    total = add(total, mul_scalar(disc, cfg.lambda_adv));
  }

  total.backward();
  auto model_params = bundle.generator_classifier_parameters();
  sgd_step(model_params, state.model_opt);
  if (use_disc) {
    auto disc_params = bundle.discriminator_parameters();
    sgd_step(disc_params, state.disc_opt);
  }
  return out;
}

FitResult fit(const DomainPair& pair, const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  pair.validate();
  const std::optional<PfrVariant> pfr = pfr_variant(cfg.variant);
  PfrConfig pfr_cfg{pair.class_count, cfg.embed_dim, cfg.sched_epochs, pfr.value_or(PfrVariant::Full)};
  if (pfr) pfr_cfg.validate();

  FitResult result;
  result.bundle = init_bundle(BundleOptions{static_cast<int>(pair.source.dim()), cfg.embed_dim,
                                            pair.class_count, cfg.hidden, cfg.dropout,
                                            mix_seed(cfg.seed, 0)});
  TrainerState state = make_trainer_state(cfg);
  const TargetEvaluator evaluator(pair);
  const std::uint64_t batch_seed = mix_seed(cfg.seed, 1);

  std::ofstream history;
  if (opts.history_path) {
    history.open(*opts.history_path);
    if (!history) throw ConfigError("cannot write " + opts.history_path->string());
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    try {
      std::optional<PfrTargets> targets;
      if (pfr) targets = scheduled_targets(pfr_cfg, epoch);
      const BatchStream stream = batch_iter(pair, static_cast<std::size_t>(cfg.batch_size), batch_seed, epoch);
      StepLosses sums;
      for (std::size_t step = 0; step < stream.size(); ++step) {
        const double progress =
            (static_cast<double>(epoch - 1) + static_cast<double>(step) / static_cast<double>(stream.size())) /
            static_cast<double>(cfg.sched_epochs);
        state.grl_coeff = std::min(1.0, progress);
        const StepLosses l = train_step(result.bundle, stream[step], targets ? &*targets : nullptr, cfg, state);
        sums.ce += l.ce;
        sums.align += l.align;
        sums.disc += l.disc;
      }
      const double steps = static_cast<double>(stream.size());
      EpochReport r;
      r.epoch = epoch;
      r.loss_ce = sums.ce / steps;
      r.loss_align = sums.align / steps;
      r.loss_adv_disc = sums.disc / steps;
      r.acc_source = evaluator.source_accuracy(result.bundle);
      r.acc_target = evaluator.target_accuracy(result.bundle);
      r.mean_embed_norm = mean_embedding_norm(result.bundle, pair);
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (double v : {r.loss_ce, r.loss_align, r.loss_adv_disc, r.mean_embed_norm})
        if (!std::isfinite(v)) throw DivergenceError("non-finite epoch statistics");
      result.history.push_back(r);
      if (history) history << history_line(r) << '\n' << std::flush;
      if (opts.on_epoch) opts.on_epoch(r);
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.divergence_message = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
  }
  return result;
}

}  // namespace ganda
