#include <filesystem>

#include "doctest.h"
#include "ganda/errors.hpp"
#include "ganda/models.hpp"

using namespace ganda;

namespace {

Matrix random_input(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(n, d);
  for (double& v : m.data) v = dist(rng);
  return m;
}

Shape shape_of(const DiffArray& a) { return a.shape(); }

}  // namespace

TEST_CASE("bundle shapes") {
  const ModelBundle b = init_bundle(2, 15, 2, 16, 0);
  REQUIRE(b.generator.layer_count() == 4);
  CHECK(shape_of(b.generator.weight(0)) == Shape{2, 16});
  CHECK(shape_of(b.generator.weight(1)) == Shape{16, 16});
  CHECK(shape_of(b.generator.weight(2)) == Shape{16, 16});
  CHECK(shape_of(b.generator.weight(3)) == Shape{16, 15});
  CHECK(b.classifier.layer_count() == 3);
  CHECK(shape_of(b.classifier.weight(2)) == Shape{16, 2});
  CHECK(b.discriminator.layer_count() == 3);
  CHECK(shape_of(b.discriminator.weight(0)) == Shape{30, 16});
  CHECK(shape_of(b.discriminator.weight(2)) == Shape{16, 1});
  CHECK_THROWS_AS(init_bundle(2, 2, 2, 16, 0), ConfigError);
}

TEST_CASE("same seed gives identical weights") {
  const auto a = init_bundle(2, 15, 2, 16, 5).named_parameters();
  const auto b = init_bundle(2, 15, 2, 16, 5).named_parameters();
  const auto c = init_bundle(2, 15, 2, 16, 6).named_parameters();
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    const auto va = a[i].value.values(), vb = b[i].value.values(), vc = c[i].value.values();
    CHECK(std::equal(va.begin(), va.end(), vb.begin()));
    if (!std::equal(va.begin(), va.end(), vc.begin())) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("forward shapes and nonnegative embeddings, including batch size 1") {
  const ModelBundle b = init_bundle(2, 15, 2, 16, 1);
  for (std::size_t n : {1u, 3u, 16u}) {
    const auto r = forward_all(b, DiffArray::from_matrix(random_input(n, 2, n)), 1.0);
    CHECK(r.features.shape() == Shape{n, 15});
    CHECK(r.logits.shape() == Shape{n, 2});
    CHECK(r.probabilities.shape() == Shape{n, 2});
    CHECK(r.domain_logits.shape() == Shape{n, 1});
    for (double v : r.features.values()) CHECK(v >= 0.0);
  }
  const auto no_disc = forward_all(b, DiffArray::from_matrix(random_input(2, 2, 0)), 1.0, false);
  CHECK_FALSE(no_disc.domain_logits.defined());
  CHECK_THROWS_AS(forward_all(b, DiffArray::from_matrix(random_input(2, 3, 0)), 1.0), ShapeError);
}

TEST_CASE("zeroed generator: zero features, logits are the classifier bias broadcast") {
  ModelBundle b = init_bundle(2, 15, 2, 16, 2);
  for (auto p : b.generator.parameters())
    for (double& v : p.mutable_values()) v = 0.0;
  auto last = b.classifier.bias(b.classifier.layer_count() - 1).mutable_values();
  last[0] = 0.25;
  last[1] = -0.5;
  const auto r = forward_all(b, DiffArray::from_matrix(random_input(4, 2, 3)), 1.0);
  for (double v : r.features.values()) CHECK(v == 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.logits.values()[i * 2] == 0.25);
    CHECK(r.logits.values()[i * 2 + 1] == -0.5);
  }
}

TEST_CASE("one combined backward reaches every parameter") {
  const ModelBundle b = init_bundle(2, 15, 2, 16, 4);
  // random biases keep hidden units alive for this small batch
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 0.5);
  for (auto& np : b.named_parameters())
    if (np.name.ends_with("bias"))
      for (double& v : np.value.mutable_values()) v = std::abs(d(rng)) + 0.1;
  const auto r = forward_all(b, DiffArray::from_matrix(random_input(8, 2, 9)), 0.5);
  const DiffArray loss = add(add(sum_squares(r.features), sum_squares(r.logits)), sum_squares(r.domain_logits));
  loss.backward();
  for (const auto& np : b.named_parameters()) {
    INFO(np.name);
    CHECK(np.value.has_grad());
    CHECK(np.value.grad().size() == np.value.size());
  }
}

TEST_CASE("predict and embed") {
  const ModelBundle b = init_bundle(2, 15, 2, 16, 7);
  const Matrix x = random_input(10, 2, 4);
  const auto pred = predict(b, x);
  const auto r = forward_all(b, DiffArray::from_matrix(x), 1.0, false);
  for (std::size_t i = 0; i < 10; ++i) {
    const double l0 = r.logits.values()[i * 2], l1 = r.logits.values()[i * 2 + 1];
    CHECK(pred[i] == (l1 > l0 ? 1 : 0));
  }
  CHECK(embed(b, x) == r.features.to_matrix());
}

TEST_CASE("save and load round trip") {
  const ModelBundle b = init_bundle(3, 9, 3, 8, 11);
  const auto path = std::filesystem::temp_directory_path() / "ganda_test_model.json";
  save_bundle(b, path);
  const ModelBundle back = load_bundle(path);
  CHECK(back.input_dim == 3);
  CHECK(back.embed_dim == 9);
  CHECK(back.class_count == 3);
  const auto pa = b.named_parameters(), pb = back.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].value.shape() == pb[i].value.shape());
    const auto va = pa[i].value.values(), vb = pb[i].value.values();
    CHECK(std::equal(va.begin(), va.end(), vb.begin()));
  }
  const Matrix x = random_input(5, 3, 0);
  CHECK(predict(b, x) == predict(back, x));
}

TEST_CASE("spec validation") {
  MlpSpec bad{{2}, OutputActivation::Identity, 0.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
