#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ganda/datasets.hpp"
#include "ganda/trainer.hpp"

namespace ganda {

struct AblationRun {
  Variant variant = Variant::GanDa;
  std::uint64_t seed = 0;
  std::vector<EpochReport> history;  // shorter than epochs when the run diverged
  bool diverged = false;
  std::string divergence_message;
};

struct AblationTable {
  int epochs = 0;
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRun> runs;  // variant-major, then seed, in input order

  const AblationRun& run(Variant v, std::uint64_t seed) const;
  // Per-epoch median of target accuracy across seeds; NaN where no seed reached the epoch.
  std::vector<double> median_curve(Variant v) const;
  // Same, for any per-epoch statistic.
  std::vector<double> median_curve(Variant v, double EpochReport::*field) const;

  // variant,seed,epoch,acc_target rows followed by variant,median,epoch,acc_target rows.
  std::string to_csv() const;
  // One line per (variant, seed) and one median line per variant, columns = epochs.
  std::string to_text() const;
};

// Median of the finite values; NaN when there are none. Even counts average the middle pair.
double median(std::vector<double> values);

// The dataset for each seed. A fixed pair ignores the argument.
using DataFactory = std::function<DomainPair(std::uint64_t seed)>;

struct AblationOptions {
  int workers = 1;  // fits run concurrently; table assembly stays in input order
};

AblationTable run_ablation(const DataFactory& data, const TrainConfig& base,
                           std::span<const Variant> variants, std::span<const std::uint64_t> seeds,
                           const AblationOptions& opts = {});
AblationTable run_ablation(const DomainPair& pair, const TrainConfig& base,
                           std::span<const Variant> variants, std::span<const std::uint64_t> seeds,
                           const AblationOptions& opts = {});

}  // namespace ganda
