#include "ganda/losses.hpp"

#include <cmath>
#include <string>

#include "ganda/errors.hpp"
#include "ganda/kernels.hpp"

namespace ganda {

DiffArray cross_entropy(const DiffArray& logits, std::span<const int> labels) {
  return mul_scalar(mean(pick(log_softmax(logits), labels)), -1.0);
}

namespace {

Matrix transposed(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
  return t;
}

double mean_kernel(const Matrix& a, const Matrix& b, double bandwidth) {
  Matrix d(a.rows, b.rows);
  const Matrix bt = transposed(b);
  kernels::active().sq_dist(a.rows, b.rows, a.cols, a.data.data(), bt.data.data(), d.data.data());
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  double total = 0.0;
  for (double v : d.data) total += std::exp(scale * v);
  return total / static_cast<double>(a.rows * b.rows);
}

void check_pair(const char* op, std::size_t ra, std::size_t ca, std::size_t rb, std::size_t cb) {
  if (ra == 0 || rb == 0) throw ShapeError(std::string(op) + ": empty sample set");
  if (ca != cb)
    throw ShapeError(std::string(op) + ": dimension mismatch " + std::to_string(ca) + " vs " +
                     std::to_string(cb));
}

}  // namespace

double rbf_mmd2(const Matrix& a, const Matrix& b, double bandwidth) {
  check_pair("rbf_mmd2", a.rows, a.cols, b.rows, b.cols);
  if (!(bandwidth > 0.0)) throw ConfigError("rbf_mmd2: bandwidth must be positive");
  return mean_kernel(a, a, bandwidth) + mean_kernel(b, b, bandwidth) -
         2.0 * mean_kernel(a, b, bandwidth);
}

DiffArray linear_mmd2(const DiffArray& a, const DiffArray& b) {
  check_pair("linear_mmd2", a.rows(), a.cols(), b.rows(), b.cols());
  return sum_squares(sub(mean_rows(a), mean_rows(b)));
}

double linear_mmd2(const Matrix& a, const Matrix& b) {
  check_pair("linear_mmd2", a.rows, a.cols, b.rows, b.cols);
  return linear_mmd2(DiffArray::from_matrix(a), DiffArray::from_matrix(b)).item();
}

AlignmentBatchStats class_means(const Matrix& features, std::span<const int> labels, int class_count) {
  if (labels.size() != features.rows)
    throw ShapeError("class_means: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.rows) + " rows");
  const auto C = static_cast<std::size_t>(class_count);
  AlignmentBatchStats stats{Matrix(C, features.cols), std::vector<std::size_t>(C, 0), {}};
  for (std::size_t r = 0; r < features.rows; ++r) {
    if (labels[r] < 0) continue;
    const auto c = static_cast<std::size_t>(labels[r]);
    if (c >= C) throw ShapeError("class_means: label " + std::to_string(labels[r]) + " >= class count");
    ++stats.counts[c];
    for (std::size_t k = 0; k < features.cols; ++k) stats.means(c, k) += features(r, k);
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (stats.counts[c] == 0) continue;
    stats.classes_present.push_back(static_cast<int>(c));
    for (std::size_t k = 0; k < features.cols; ++k)
      stats.means(c, k) /= static_cast<double>(stats.counts[c]);
  }
  return stats;
}

namespace {

// Sum over present classes of |mean - target row|^2, divided by the present count.
DiffArray domain_alignment(const DiffArray& features, std::span<const int> labels,
                           const PfrTargets& targets) {
  const std::size_t C = targets.matrix.rows;
  const std::size_t D = targets.matrix.cols;
  if (features.cols() != D)
    throw ShapeError("alignment_loss: feature dimension " + std::to_string(features.cols()) +
                     " differs from target dimension " + std::to_string(D));
  if (labels.size() != features.rows())
    throw ShapeError("alignment_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.rows()) + " rows");
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0) continue;
    if (static_cast<std::size_t>(labels[r]) >= C)
      throw ShapeError("alignment_loss: label " + std::to_string(labels[r]) + " >= class count");
    members[static_cast<std::size_t>(labels[r])].push_back(r);
  }
  DiffArray total;
  std::size_t present = 0;
  for (std::size_t c = 0; c < C; ++c) {
    if (members[c].empty()) continue;
    const auto row = targets.matrix.row(c);
    DiffArray target({1, D}, std::vector<double>(row.begin(), row.end()));
    DiffArray term = sum_squares(sub(mean_rows(gather_rows(features, members[c])), target));
    total = total.defined() ? add(total, term) : term;
    ++present;
  }
  if (present == 0) return DiffArray::scalar(0.0);
  return mul_scalar(total, 1.0 / static_cast<double>(present));
}

}  // namespace

DiffArray alignment_loss(const DiffArray& source_features, std::span<const int> source_labels,
                         const DiffArray& target_features, std::span<const int> target_labels,
                         const PfrTargets& targets) {
  DiffArray loss = domain_alignment(source_features, source_labels, targets);
  if (target_features.defined())
    loss = add(loss, domain_alignment(target_features, target_labels, targets));
  return loss;
}

std::vector<double> multilinear(std::span<const double> f, std::span<const double> y) {
  std::vector<double> out(f.size() * y.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) out[i * y.size() + j] = f[i] * y[j];
  return out;
}

DiffArray adversarial_loss(const DiffArray& source_logits, const DiffArray& target_logits) {
  const double count = static_cast<double>(source_logits.size() + target_logits.size());
  // -log sigmoid(z) = softplus(-z);  -log(1 - sigmoid(z)) = softplus(z)
  DiffArray s = sum(softplus(mul_scalar(source_logits, -1.0)));
  DiffArray t = sum(softplus(target_logits));
  return mul_scalar(add(s, t), 1.0 / count);
}

}  // namespace ganda
