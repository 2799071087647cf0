#pragma once
// Predefined per-class feature targets: an orthogonal block per class (one
// all-ones segment of width m = floor(D / (C + 1)) in a distinct position)
// concatenated with a block shared by every class. Each epoch the orthogonal
// part is scaled by (1/alpha)^e and the shared part by alpha^e, alpha = 1/(C+1),
// with e clamped at the schedule length.

#include <cstddef>
#include <string_view>

#include "ganda/matrix.hpp"

namespace ganda {

enum class PfrVariant {
  Full,    // both blocks scheduled
  NoCfr,   // shared block forced to zero
  NoOfr,   // orthogonal block forced to zero, shared block scheduled
  FixCfr,  // shared block held at ones, orthogonal block scheduled
};

std::string_view to_string(PfrVariant v);

struct PfrConfig {
  int class_count = 2;
  int embed_dim = 15;
  int sched_epochs = 3;
  PfrVariant variant = PfrVariant::Full;

  double alpha() const { return 1.0 / static_cast<double>(class_count + 1); }
  void validate() const;
};

struct PfrTargets {
  Matrix matrix;  // class_count x embed_dim
  std::size_t ofr_dim = 0;
  std::size_t cfr_dim = 0;
  int epoch_applied = 0;
  double ofr_scale = 0.0;
  double cfr_scale = 0.0;
};

int block_width(int class_count, int embed_dim);
// C x (C*m): row c is one on [c*m, (c+1)*m), zero elsewhere.
Matrix build_ofr(int class_count, int embed_dim);
// C x (D - C*m), all ones.
Matrix build_cfr(int class_count, int embed_dim);

// Epochs are 1-indexed; the exponent is min(epoch, sched_epochs).
PfrTargets scheduled_targets(const PfrConfig& cfg, int epoch);

// Number of scheduled_targets() calls made by this process.
std::size_t scheduled_targets_calls();

}  // namespace ganda
