#pragma once
// Central finite-difference checks of the analytic gradients of every network
// parameter under each loss term, on small random problems.

#include <cstdint>
#include <string>
#include <vector>

namespace ganda {

struct GradCheckEntry {
  std::string network;  // generator, classifier, discriminator
  std::string term;     // cross_entropy, alignment, adversarial
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // perturbations that flipped a ReLU
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  int configs = 0;

  double max_rel_error() const;
  bool passed(double tolerance = 1e-5) const;
};

struct GradCheckOptions {
  int configs = 10;
  double step = 1e-4;
};

// Errors are measured per (network, term, configuration): the largest
// |analytic - numeric| over the network's parameters divided by the largest
// |analytic| or |numeric| among them (floored at 1e-6).
double relative_error(double abs_error, double scale);

GradCheckReport grad_check(std::uint64_t seed, const GradCheckOptions& opts = {});

}  // namespace ganda
