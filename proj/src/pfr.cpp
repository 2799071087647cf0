#include "ganda/pfr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "ganda/errors.hpp"

namespace ganda {

namespace {
std::atomic<std::size_t> g_schedule_calls{0};
}

std::string_view to_string(PfrVariant v) {
  switch (v) {
    case PfrVariant::Full: return "FULL";
    case PfrVariant::NoCfr: return "NO_CFR";
    case PfrVariant::NoOfr: return "NO_OFR";
    case PfrVariant::FixCfr: return "FIX_CFR";
  }
  return "?";
}

void PfrConfig::validate() const {
  if (class_count < 1) throw ConfigError("pfr: class_count must be >= 1");
  if (embed_dim < class_count + 1)
    throw ConfigError("pfr: embed_dim " + std::to_string(embed_dim) + " < class_count + 1 = " +
                      std::to_string(class_count + 1));
  if (sched_epochs < 1) throw ConfigError("pfr: sched_epochs must be >= 1");
}

int block_width(int class_count, int embed_dim) {
  if (class_count < 1) throw ConfigError("pfr: class_count must be >= 1");
  if (embed_dim < class_count + 1)
    throw ConfigError("pfr: degenerate targets, embed_dim " + std::to_string(embed_dim) +
                      " < class_count + 1 = " + std::to_string(class_count + 1));
  return embed_dim / (class_count + 1);
}

Matrix build_ofr(int class_count, int embed_dim) {
  const auto m = static_cast<std::size_t>(block_width(class_count, embed_dim));
  const auto C = static_cast<std::size_t>(class_count);
  Matrix ofr(C, C * m);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = c * m; j < (c + 1) * m; ++j) ofr(c, j) = 1.0;
  return ofr;
}

Matrix build_cfr(int class_count, int embed_dim) {
  const auto m = static_cast<std::size_t>(block_width(class_count, embed_dim));
  const auto C = static_cast<std::size_t>(class_count);
  Matrix cfr(C, static_cast<std::size_t>(embed_dim) - C * m);
  std::fill(cfr.data.begin(), cfr.data.end(), 1.0);
  return cfr;
}

PfrTargets scheduled_targets(const PfrConfig& cfg, int epoch) {
  ++g_schedule_calls;
  cfg.validate();
  if (epoch < 1) throw ConfigError("pfr: epoch must be >= 1, got " + std::to_string(epoch));

  const Matrix ofr = build_ofr(cfg.class_count, cfg.embed_dim);
  const Matrix cfr = build_cfr(cfg.class_count, cfg.embed_dim);
  const int e = std::min(epoch, cfg.sched_epochs);
  PfrTargets t;
  t.ofr_dim = ofr.cols;
  t.cfr_dim = cfr.cols;
  t.epoch_applied = e;
  // (1/alpha)^e = (C+1)^e is exact in double for any realistic C and e.
  t.ofr_scale = std::pow(static_cast<double>(cfg.class_count + 1), e);
  t.cfr_scale = 1.0 / t.ofr_scale;
  switch (cfg.variant) {
    case PfrVariant::Full: break;
    case PfrVariant::NoCfr: t.cfr_scale = 0.0; break;
    case PfrVariant::NoOfr: t.ofr_scale = 0.0; break;
    case PfrVariant::FixCfr: t.cfr_scale = 1.0; break;
  }

  t.matrix = Matrix(ofr.rows, ofr.cols + cfr.cols);
  for (std::size_t c = 0; c < ofr.rows; ++c) {
    for (std::size_t j = 0; j < ofr.cols; ++j) t.matrix(c, j) = t.ofr_scale * ofr(c, j);
    for (std::size_t j = 0; j < cfr.cols; ++j) t.matrix(c, ofr.cols + j) = t.cfr_scale * cfr(c, j);
  }
  return t;
}

std::size_t scheduled_targets_calls() { return g_schedule_calls.load(); }

}  // namespace ganda
