#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ganda/diffcore.hpp"

namespace ganda {

enum class OutputActivation { Relu, Identity };

struct MlpSpec {
  std::vector<int> layer_widths;  // input, hidden..., output
  OutputActivation output_activation = OutputActivation::Identity;
  double dropout = 0.0;           // applied after hidden ReLUs when training
  void validate() const;
};

class Mlp {
 public:
  Mlp() = default;
  // He-normal weights (std sqrt(2 / fan_in)), zero biases.
  Mlp(MlpSpec spec, std::mt19937_64& rng);

  // `rng` enables dropout; pass nullptr for deterministic evaluation.
  DiffArray forward(const DiffArray& x, std::mt19937_64* rng = nullptr) const;

  const MlpSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return weights_.size(); }
  // Weight i is [in x out]; bias i is [out].
  DiffArray& weight(std::size_t i) { return weights_[i]; }
  DiffArray& bias(std::size_t i) { return biases_[i]; }
  const DiffArray& weight(std::size_t i) const { return weights_[i]; }
  const DiffArray& bias(std::size_t i) const { return biases_[i]; }
  std::vector<DiffArray> parameters() const;

 private:
  MlpSpec spec_;
  std::vector<DiffArray> weights_;
  std::vector<DiffArray> biases_;
};

struct NamedParameter {
  std::string name;
  DiffArray value;
};

struct ModelBundle {
  int input_dim = 0;
  int embed_dim = 0;
  int class_count = 0;
  Mlp generator;      // input -> ... -> D, ReLU head
  Mlp classifier;     // D -> ... -> C logits
  Mlp discriminator;  // D*C -> ... -> 1 logit

  std::vector<NamedParameter> named_parameters() const;
  std::vector<DiffArray> generator_classifier_parameters() const;
  std::vector<DiffArray> discriminator_parameters() const;
};

struct BundleOptions {
  int input_dim = 2;
  int embed_dim = 15;
  int class_count = 2;
  int hidden = 16;
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

// generator [d_in, h, h, h, D], classifier [D, h, h, C], discriminator [D*C, h, h, 1].
ModelBundle init_bundle(const BundleOptions& opts);
ModelBundle init_bundle(int input_dim, int embed_dim, int class_count, int hidden, std::uint64_t seed);

struct ForwardResult {
  DiffArray features;      // n x D
  DiffArray logits;        // n x C
  DiffArray probabilities; // n x C
  DiffArray domain_logits; // n x 1, empty when the discriminator was skipped
};

// features -> logits -> softmax; the discriminator sees
// grad_reverse(rowwise_outer(features, softmax), grl_coeff). Pass
// with_discriminator = false to stop after the classifier.
ForwardResult forward_all(const ModelBundle& bundle, const DiffArray& x, double grl_coeff,
                          bool with_discriminator = true, std::mt19937_64* dropout_rng = nullptr);

// Argmax of classifier(generator(x)), ties to the lower class.
std::vector<int> predict(const ModelBundle& bundle, const Matrix& x);
Matrix embed(const ModelBundle& bundle, const Matrix& x);

// JSON list of {name, shape, values} records plus the architecture header.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace ganda
