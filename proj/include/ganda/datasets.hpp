#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ganda/matrix.hpp"

namespace ganda {

struct LabeledSet {
  Matrix features;
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols; }
  // Throws ConfigError when a label is out of range, a feature is not finite,
  // the set is empty, or the row counts disagree.
  void validate() const;
};

// Target-domain ground truth. Only the evaluator reads it; the training path
// sees DomainPair::target_features alone.
class HeldOutLabels {
 public:
  HeldOutLabels() = default;
  explicit HeldOutLabels(std::vector<int> labels) : labels_(std::move(labels)) {}
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<int> labels_;
  friend std::span<const int> reveal_for_evaluation(const HeldOutLabels& held);
};

std::span<const int> reveal_for_evaluation(const HeldOutLabels& held);

struct DomainPair {
  LabeledSet source;
  Matrix target_features;
  HeldOutLabels target_labels;
  int class_count = 0;

  void validate() const;
};

struct MoonsOptions {
  int n_per_class = 100;
  double noise_sigma = 0.1;
  double rotation_degrees = 35.0;
  std::uint64_t seed = 0;
};

// Class 0 = (cos t, sin t), class 1 = (1 - cos t, 0.5 - sin t), t evenly spaced on [0, pi].
LabeledSet make_moons(int n_per_class, double noise_sigma, std::uint64_t seed);

// Rotates every point about the origin; labels are unchanged. 2-D only.
LabeledSet rotate(const LabeledSet& set, double theta_degrees);

// Source = moons(seed); target = rotate(moons(seed + 1), rotation) with labels held out.
DomainPair make_rotated_moons(const MoonsOptions& opts);

// C Gaussian clusters (unit within-class noise, centers ~ N(0, spread^2));
// the target reuses the centers translated by `shift` with fresh noise.
DomainPair make_blobs(int class_count, int dim, int n_per_class, double center_spread,
                      std::span<const double> shift, std::uint64_t seed);

// Each row: comma-separated reals then an integer label. When `class_count` is
// absent it is 1 + the largest source label.
DomainPair load_feature_csv(const std::filesystem::path& source_path,
                            const std::filesystem::path& target_path,
                            std::optional<int> class_count = std::nullopt);

LabeledSet read_labeled_csv(const std::filesystem::path& path);
void write_labeled_csv(const std::filesystem::path& path, const Matrix& features,
                       std::span<const int> labels);

struct Batch {
  LabeledSet source;
  Matrix target;
  std::vector<std::size_t> source_indices;
  std::vector<std::size_t> target_indices;
};

// Seeded per-epoch shuffling of both domains, drawn independently. Each domain
// contributes ceil(n / batch_size) batches, the last possibly smaller; when the
// counts differ the shorter domain's permutation is reused cyclically so every
// yielded pair has both halves.
class BatchStream {
 public:
  BatchStream(const DomainPair& pair, std::size_t batch_size, std::uint64_t seed, int epoch);

  std::size_t size() const { return steps_; }
  std::size_t source_batch_count() const { return source_batches_; }
  std::size_t target_batch_count() const { return target_batches_; }
  Batch operator[](std::size_t step) const;

  std::span<const std::size_t> source_order() const { return source_perm_; }
  std::span<const std::size_t> target_order() const { return target_perm_; }

 private:
  const DomainPair* pair_;
  std::size_t batch_size_;
  std::vector<std::size_t> source_perm_;
  std::vector<std::size_t> target_perm_;
  std::size_t source_batches_;
  std::size_t target_batches_;
  std::size_t steps_;
};

BatchStream batch_iter(const DomainPair& pair, std::size_t batch_size, std::uint64_t seed,
                       int epoch);

}  // namespace ganda
