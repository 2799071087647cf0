#pragma once

#include <span>
#include <vector>

#include "ganda/diffcore.hpp"
#include "ganda/matrix.hpp"
#include "ganda/pfr.hpp"

namespace ganda {

// Mean over rows of -log softmax(logits)[label].
DiffArray cross_entropy(const DiffArray& logits, std::span<const int> labels);

// Biased (V-statistic) MMD^2 with k(x, y) = exp(-|x - y|^2 / (2 bandwidth^2)).
double rbf_mmd2(const Matrix& a, const Matrix& b, double bandwidth);

// |mean(A) - mean(B)|^2, differentiable in both arguments.
DiffArray linear_mmd2(const DiffArray& a, const DiffArray& b);
double linear_mmd2(const Matrix& a, const Matrix& b);

struct AlignmentBatchStats {
  Matrix means;  // C x D; rows of absent classes are zero
  std::vector<std::size_t> counts;
  std::vector<int> classes_present;

  bool present(int c) const { return counts[static_cast<std::size_t>(c)] > 0; }
};

// Labels < 0 are skipped (masked-out pseudo-labels).
AlignmentBatchStats class_means(const Matrix& features, std::span<const int> labels, int class_count);

// For each domain: sum over classes present in the batch of
// |batch class mean - target row|^2, divided by the number of present classes.
// Source and target terms are added. Labels < 0 are ignored; an undefined
// `target_features` drops the target term.
DiffArray alignment_loss(const DiffArray& source_features, std::span<const int> source_labels,
                         const DiffArray& target_features, std::span<const int> target_labels,
                         const PfrTargets& targets);

// Flattened outer product: out[i * C + j] = f[i] * y[j].
std::vector<double> multilinear(std::span<const double> f, std::span<const double> y);

// Domain-classifier BCE on pre-sigmoid logits, source labelled 1 and target 0,
// averaged over all n_s + n_t samples. The generator sees this loss through the
// gradient-reversal junction placed at the discriminator input.
DiffArray adversarial_loss(const DiffArray& source_logits, const DiffArray& target_logits);

}  // namespace ganda
