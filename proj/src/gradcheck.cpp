#include "ganda/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ganda/losses.hpp"
#include "ganda/models.hpp"
#include "ganda/pfr.hpp"

namespace ganda {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

bool GradCheckReport::passed(double tolerance) const {
  if (entries.empty()) return false;
  for (const auto& e : entries)
    if (e.checked == 0 || !(e.max_rel_error < tolerance)) return false;
  return true;
}

double relative_error(double abs_error, double scale) {
  return abs_error / std::max(scale, 1e-6);
}

namespace {

enum class Term { CrossEntropy, Alignment, Adversarial };

const char* term_name(Term t) {
  switch (t) {
    case Term::CrossEntropy: return "cross_entropy";
    case Term::Alignment: return "alignment";
    case Term::Adversarial: return "adversarial";
  }
  return "?";
}

struct Problem {
  ModelBundle bundle;
  Matrix x;
  std::size_t source_rows = 0;
  std::vector<int> source_labels;
  std::vector<int> target_labels;
  PfrTargets targets;
  double grl = 1.0;
};

Problem random_problem(std::mt19937_64& rng) {
  auto pick_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::normal_distribution<double> normal(0.0, 1.0);

  const int d_in = pick_int(2, 4);
  const int C = pick_int(2, 4);
  const int D = pick_int(C + 1, C + 5);
  const int hidden = pick_int(3, 6);
  const std::size_t ns = static_cast<std::size_t>(pick_int(2, 6));
  const std::size_t nt = static_cast<std::size_t>(pick_int(2, 6));

  Problem p;
  p.bundle = init_bundle(d_in, D, C, hidden, rng());
  // nonzero biases so their gradients are exercised
  for (auto& np : p.bundle.named_parameters())
    if (np.name.ends_with("bias"))
      for (double& v : np.value.mutable_values()) v = 0.1 * normal(rng);

  p.x = Matrix(ns + nt, static_cast<std::size_t>(d_in));
  for (double& v : p.x.data) v = normal(rng);
  p.source_rows = ns;
  for (std::size_t i = 0; i < ns; ++i) p.source_labels.push_back(pick_int(0, C - 1));
  for (std::size_t i = 0; i < nt; ++i) p.target_labels.push_back(pick_int(-1, C - 1));

  static constexpr PfrVariant kVariants[] = {PfrVariant::Full, PfrVariant::NoCfr, PfrVariant::NoOfr,
                                             PfrVariant::FixCfr};
  PfrConfig pc{C, D, 3, kVariants[pick_int(0, 3)]};
  p.targets = scheduled_targets(pc, pick_int(1, 5));
  p.grl = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  return p;
}

// Mlp::forward, additionally recording the sign of every ReLU input.
DiffArray forward_recording(const Mlp& m, DiffArray x, std::vector<char>& pattern) {
  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    x = add_row_bias(matmul(x, m.weight(i)), m.bias(i));
    const bool last = i + 1 == m.layer_count();
    if (!last || m.spec().output_activation == OutputActivation::Relu) {
      for (double v : x.values()) pattern.push_back(v > 0.0);
      x = relu(x);
    }
  }
  return x;
}

DiffArray term_loss(const Problem& p, Term term, std::vector<char>& pattern) {
  pattern.clear();
  const std::size_t ns = p.source_rows;
  const std::size_t n = p.x.rows;
  const DiffArray features = forward_recording(p.bundle.generator, DiffArray::from_matrix(p.x), pattern);
  if (term == Term::Alignment)
    return alignment_loss(slice_rows(features, 0, ns), p.source_labels, slice_rows(features, ns, n),
                          p.target_labels, p.targets);
  const DiffArray logits = forward_recording(p.bundle.classifier, features, pattern);
  if (term == Term::CrossEntropy) return cross_entropy(slice_rows(logits, 0, ns), p.source_labels);
  const DiffArray joint = grad_reverse(rowwise_outer(features, softmax(logits)), p.grl);
  const DiffArray domain = forward_recording(p.bundle.discriminator, joint, pattern);
  return adversarial_loss(slice_rows(domain, 0, ns), slice_rows(domain, ns, n));
}

struct NetworkParams {
  const char* name;
  std::vector<DiffArray> params;
};

void check_term(Problem& p, Term term, double h, std::vector<GradCheckEntry>& entries) {
  std::vector<NetworkParams> nets{{"generator", p.bundle.generator.parameters()},
                                  {"classifier", p.bundle.classifier.parameters()},
                                  {"discriminator", p.bundle.discriminator.parameters()}};
  for (auto& net : nets)
    for (auto& prm : net.params) prm.clear_grad();

  std::vector<char> base, plus, minus;
  term_loss(p, term, base).backward();

  for (auto& net : nets) {
    const bool reached = std::all_of(net.params.begin(), net.params.end(),
                                     [](const DiffArray& a) { return a.has_grad(); });
    if (!reached) continue;
    // the reversal junction sits between the generator/classifier and the discriminator
    const double sign = term == Term::Adversarial && std::string(net.name) != "discriminator" ? -p.grl : 1.0;

    auto it = std::find_if(entries.begin(), entries.end(), [&](const GradCheckEntry& e) {
      return e.network == net.name && e.term == term_name(term);
    });
    if (it == entries.end()) {
      entries.push_back({net.name, term_name(term)});
      it = entries.end() - 1;
    }

    double worst_diff = 0.0, scale = 0.0;
    for (auto& prm : net.params) {
      const std::vector<double> analytic(prm.grad().begin(), prm.grad().end());
      auto values = prm.mutable_values();
      for (std::size_t k = 0; k < values.size(); ++k) {
        const double saved = values[k];
        values[k] = saved + h;
        const double up = term_loss(p, term, plus).item();
        values[k] = saved - h;
        const double down = term_loss(p, term, minus).item();
        values[k] = saved;
        if (plus != base || minus != base) {
          ++it->skipped_kinks;
          continue;
        }
        const double numeric = sign * (up - down) / (2.0 * h);
        worst_diff = std::max(worst_diff, std::abs(analytic[k] - numeric));
        scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric)});
        ++it->checked;
      }
      prm.clear_grad();
    }
    it->max_rel_error = std::max(it->max_rel_error, relative_error(worst_diff, scale));
  }
}

}  // namespace

GradCheckReport grad_check(std::uint64_t seed, const GradCheckOptions& opts) {
  std::mt19937_64 rng(seed);
  GradCheckReport report;
  report.configs = opts.configs;
  for (int c = 0; c < opts.configs; ++c) {
    Problem p = random_problem(rng);
    for (Term t : {Term::CrossEntropy, Term::Alignment, Term::Adversarial})
      check_term(p, t, opts.step, report.entries);
  }
  return report;
}

}  // namespace ganda
