#include "ganda/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "ganda/errors.hpp"

namespace ganda {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_cell(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

double median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const AblationRun& AblationTable::run(Variant v, std::uint64_t seed) const {
  for (const auto& r : runs)
    if (r.variant == v && r.seed == seed) return r;
  throw ConfigError("no run for " + std::string(to_string(v)) + " seed " + std::to_string(seed));
}

std::vector<double> AblationTable::median_curve(Variant v) const {
  return median_curve(v, &EpochReport::acc_target);
}

std::vector<double> AblationTable::median_curve(Variant v, double EpochReport::*field) const {
  std::vector<double> curve(static_cast<std::size_t>(epochs), kNaN);
  for (int e = 0; e < epochs; ++e) {
    std::vector<double> column;
    for (const auto& r : runs)
      if (r.variant == v && static_cast<std::size_t>(e) < r.history.size())
        column.push_back(r.history[static_cast<std::size_t>(e)].*field);
    curve[static_cast<std::size_t>(e)] = median(std::move(column));
  }
  return curve;
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << "variant,seed,epoch,acc_target\n";
  for (const auto& r : runs)
    for (const auto& rep : r.history)
      out << to_string(r.variant) << ',' << r.seed << ',' << rep.epoch << ',' << format_cell(rep.acc_target)
          << '\n';
  for (Variant v : variants) {
    const auto curve = median_curve(v);
    for (int e = 0; e < epochs; ++e)
      out << to_string(v) << ",median," << e + 1 << ',' << format_cell(curve[static_cast<std::size_t>(e)])
          << '\n';
  }
  return out.str();
}

std::string AblationTable::to_text() const {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"variant", "seed"};
  for (int e = 1; e <= epochs; ++e) header.push_back("ep" + std::to_string(e));
  rows.push_back(header);
  for (Variant v : variants) {
    for (const auto& r : runs) {
      if (r.variant != v) continue;
      std::vector<std::string> row{std::string(to_string(v)), std::to_string(r.seed)};
      for (int e = 0; e < epochs; ++e)
        row.push_back(static_cast<std::size_t>(e) < r.history.size()
                          ? format_cell(r.history[static_cast<std::size_t>(e)].acc_target)
                          : "-");
      rows.push_back(row);
    }
    std::vector<std::string> row{std::string(to_string(v)), "median"};
    for (double m : median_curve(v)) row.push_back(std::isfinite(m) ? format_cell(m) : "-");
    rows.push_back(row);
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      if (c < 2)
        out << row[c] << std::string(width[c] - row[c].size(), ' ');
      else
        out << std::string(width[c] - row[c].size(), ' ') << row[c];
    }
    out << '\n';
  }
  return out.str();
}

AblationTable run_ablation(const DataFactory& data, const TrainConfig& base,
                           std::span<const Variant> variants, std::span<const std::uint64_t> seeds,
                           const AblationOptions& opts) {
  if (variants.empty()) throw ConfigError("run_ablation: no variants");
  if (seeds.empty()) throw ConfigError("run_ablation: no seeds");
  base.validate();

  AblationTable table;
  table.epochs = base.epochs;
  table.variants.assign(variants.begin(), variants.end());
  table.seeds.assign(seeds.begin(), seeds.end());
  for (Variant v : variants)
    for (std::uint64_t s : seeds) {
      AblationRun r;
      r.variant = v;
      r.seed = s;
      table.runs.push_back(std::move(r));
    }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(table.runs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < table.runs.size(); i = next++) {
      AblationRun& run = table.runs[i];
      try {
        TrainConfig cfg = base;
        cfg.variant = run.variant;
        cfg.seed = run.seed;
        const DomainPair pair = data(run.seed);
        FitResult fit_result = fit(pair, cfg);
        run.history = std::move(fit_result.history);
        run.diverged = fit_result.diverged;
        run.divergence_message = std::move(fit_result.divergence_message);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const int workers = std::clamp(opts.workers, 1, static_cast<int>(table.runs.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return table;
}

AblationTable run_ablation(const DomainPair& pair, const TrainConfig& base,
                           std::span<const Variant> variants, std::span<const std::uint64_t> seeds,
                           const AblationOptions& opts) {
  return run_ablation([&pair](std::uint64_t) { return pair; }, base, variants, seeds, opts);
}

}  // namespace ganda
