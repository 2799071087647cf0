#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ganda/errors.hpp"
#include "ganda/losses.hpp"
#include "ganda/pfr.hpp"

using namespace ganda;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data) v = d(rng);
  return m;
}

double rbf_oracle(const Matrix& a, const Matrix& b, double bw) {
  auto k = [&](const Matrix& x, std::size_t i, const Matrix& y, std::size_t j) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) d2 += (x(i, c) - y(j, c)) * (x(i, c) - y(j, c));
    return std::exp(-d2 / (2.0 * bw * bw));
  };
  double aa = 0, bb = 0, ab = 0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.rows; ++j) aa += k(a, i, a, j);
  for (std::size_t i = 0; i < b.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) bb += k(b, i, b, j);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) ab += k(a, i, b, j);
  const double na = static_cast<double>(a.rows), nb = static_cast<double>(b.rows);
  return aa / (na * na) + bb / (nb * nb) - 2.0 * ab / (na * nb);
}

double linear_oracle(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (std::size_t c = 0; c < a.cols; ++c) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.rows; ++i) ma += a(i, c);
    for (std::size_t i = 0; i < b.rows; ++i) mb += b(i, c);
    const double d = ma / static_cast<double>(a.rows) - mb / static_cast<double>(b.rows);
    total += d * d;
  }
  return total;
}

DiffArray da(const Matrix& m, bool grad = false) { return DiffArray::from_matrix(m, grad); }

}  // namespace

TEST_CASE("cross entropy") {
  DiffArray uniform({3, 4}, std::vector<double>(12, 0.5));
  std::vector<int> labels{0, 3, 2};
  CHECK(cross_entropy(uniform, labels).item() == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  double prev = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 60.0}) {
    DiffArray l({2, 2}, {margin, 0, 0, margin});
    const double v = cross_entropy(l, std::vector<int>{0, 1}).item();
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-20);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    const Matrix logits = random_matrix(rng, 5, 3, 3.0);
    std::vector<int> y(5);
    for (int& v : y) v = std::uniform_int_distribution<int>(0, 2)(rng);
    double expect = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      double z = 0.0;
      for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits(i, c));
      expect += -(logits(i, static_cast<std::size_t>(y[i])) - std::log(z)) / 5.0;
    }
    CHECK(cross_entropy(da(logits), y).item() == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("mmd examples") {
  const Matrix a(1, 1, {0.0}), b(1, 1, {1.0});
  for (double s : {0.5, 1.0, 2.0})
    CHECK(rbf_mmd2(a, b, s) == doctest::Approx(2.0 - 2.0 * std::exp(-1.0 / (2 * s * s))).epsilon(1e-15));
  const Matrix m1(1, 2, {1, 0}), m2(1, 2, {0, 1});
  CHECK(linear_mmd2(m1, m2) == 2.0);
  CHECK(linear_mmd2(m1, m1) == 0.0);
  CHECK_THROWS_AS(rbf_mmd2(Matrix(0, 2), m1, 1.0), ShapeError);
  CHECK_THROWS_AS(linear_mmd2(Matrix(0, 2), m1), ShapeError);
}

TEST_CASE("property: mmd estimators agree with brute force") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    const Matrix a = random_matrix(rng, std::uniform_int_distribution<std::size_t>(1, 9)(rng), d);
    const Matrix b = random_matrix(rng, std::uniform_int_distribution<std::size_t>(1, 9)(rng), d);
    const double bw = std::uniform_real_distribution<double>(0.3, 3.0)(rng);
    CHECK(std::abs(rbf_mmd2(a, b, bw) - rbf_oracle(a, b, bw)) <= 1e-10);
    CHECK(std::abs(linear_mmd2(a, b) - linear_oracle(a, b)) <= 1e-10);
    CHECK(std::abs(linear_mmd2(da(a), da(b)).item() - linear_oracle(a, b)) <= 1e-10);
    CHECK(rbf_mmd2(a, a, bw) <= 1e-12);
    CHECK(rbf_mmd2(a, b, bw) >= -1e-12);
    CHECK(rbf_mmd2(a, b, bw) == doctest::Approx(rbf_mmd2(b, a, bw)).epsilon(1e-12));
    CHECK(linear_mmd2(a, b) == doctest::Approx(linear_mmd2(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("class means") {
  const Matrix f(2, 2, {1, 0, 3, 0});
  const auto s = class_means(f, std::vector<int>{0, 0}, 2);
  CHECK(s.means(0, 0) == 2.0);
  CHECK(s.means(0, 1) == 0.0);
  CHECK(s.present(0));
  CHECK_FALSE(s.present(1));
  CHECK(s.classes_present == std::vector<int>{0});

  const Matrix g(3, 2, {1, 2, 3, 4, 5, 6});
  const auto one = class_means(g, std::vector<int>{2, 0, 1}, 3);
  CHECK(one.means(2, 1) == 2.0);
  CHECK(one.means(0, 0) == 3.0);
  CHECK(one.means(1, 1) == 6.0);

  const auto masked = class_means(g, std::vector<int>{0, -1, 0}, 2);
  CHECK(masked.counts[0] == 2);
  CHECK(masked.means(0, 0) == 3.0);
}

TEST_CASE("alignment examples") {
  PfrTargets t;
  t.matrix = Matrix(2, 2, {0, 0, 5, 5});
  t.ofr_dim = 1;
  t.cfr_dim = 1;
  DiffArray fs({2, 2}, {0, 0, 0, 0});
  CHECK(alignment_loss(fs, std::vector<int>{0, 0}, DiffArray(), {}, t).item() == 0.0);
  DiffArray fs2({1, 2}, {1, 1});
  CHECK(alignment_loss(fs2, std::vector<int>{0}, DiffArray(), {}, t).item() == 2.0);

  DiffArray wrong({1, 3}, {1, 1, 1});
  CHECK_THROWS_AS(alignment_loss(wrong, std::vector<int>{0}, DiffArray(), {}, t), ShapeError);
}

TEST_CASE("property: alignment matches a per-class oracle and ignores row order") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int C = std::uniform_int_distribution<int>(2, 4)(rng);
    const int D = C + 1 + std::uniform_int_distribution<int>(0, 4)(rng);
    const PfrTargets t = scheduled_targets(PfrConfig{C, D, 3, PfrVariant::Full},
                                           std::uniform_int_distribution<int>(1, 4)(rng));
    const std::size_t ns = 7, nt = 6;
    const Matrix s = random_matrix(rng, ns, static_cast<std::size_t>(D));
    const Matrix tt = random_matrix(rng, nt, static_cast<std::size_t>(D));
    std::vector<int> ys(ns), yt(nt);
    for (int& v : ys) v = std::uniform_int_distribution<int>(0, C - 1)(rng);
    for (int& v : yt) v = std::uniform_int_distribution<int>(-1, C - 1)(rng);

    auto domain_term = [&](const Matrix& f, const std::vector<int>& y) {
      double total = 0.0;
      int present = 0;
      for (int c = 0; c < C; ++c) {
        std::vector<double> mean(static_cast<std::size_t>(D), 0.0);
        int n = 0;
        for (std::size_t i = 0; i < f.rows; ++i)
          if (y[i] == c) {
            ++n;
            for (int k = 0; k < D; ++k) mean[static_cast<std::size_t>(k)] += f(i, static_cast<std::size_t>(k));
          }
        if (n == 0) continue;
        ++present;
        for (int k = 0; k < D; ++k) {
          const double diff = mean[static_cast<std::size_t>(k)] / n - t.matrix(static_cast<std::size_t>(c), static_cast<std::size_t>(k));
          total += diff * diff;
        }
      }
      return present > 0 ? total / present : 0.0;
    };
    const double expect = domain_term(s, ys) + domain_term(tt, yt);
    const double got = alignment_loss(da(s), ys, da(tt), yt, t).item();
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));

    // permute rows together with their labels
    std::vector<std::size_t> perm(ns);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> ys_p(ns);
    for (std::size_t i = 0; i < ns; ++i) ys_p[i] = ys[perm[i]];
    const double permuted = alignment_loss(da(take_rows(s, perm)), ys_p, da(tt), yt, t).item();
    CHECK(permuted == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("NO_OFR alignment step shrinks embedding norm on a frozen batch") {
  std::mt19937_64 rng(5);
  const PfrTargets t = scheduled_targets(PfrConfig{2, 15, 3, PfrVariant::NoOfr}, 10);
  Matrix f0 = random_matrix(rng, 8, 15);
  for (double& v : f0.data) v = std::abs(v) + 0.5;
  DiffArray f = da(f0, true);
  const std::vector<int> y{0, 1, 0, 1, 0, 1, 1, 0};
  auto mean_norm = [](const DiffArray& a) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double n2 = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) n2 += a.values()[i * a.cols() + k] * a.values()[i * a.cols() + k];
      total += std::sqrt(n2);
    }
    return total / static_cast<double>(a.rows());
  };
  const double before = mean_norm(f);
  alignment_loss(f, y, DiffArray(), {}, t).backward();
  std::vector<DiffArray> ps{f};
  SgdState st{0.1, 0.0, 0.0, {}};
  sgd_step(ps, st);
  CHECK(mean_norm(f) < before);
}

TEST_CASE("multilinear") {
  std::vector<double> f{0, 0, 1, 0}, y{0, 1, 0};
  const auto out = multilinear(f, y);
  REQUIRE(out.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(out[i] == (i == 7 ? 1.0 : 0.0));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> f1(5), f2(5), yy(3);
  for (double& v : f1) v = d(rng);
  for (double& v : f2) v = d(rng);
  for (double& v : yy) v = d(rng);
  std::vector<double> combo(5);
  for (std::size_t i = 0; i < 5; ++i) combo[i] = 2.0 * f1[i] - 3.0 * f2[i];
  const auto lhs = multilinear(combo, yy);
  const auto a = multilinear(f1, yy), b = multilinear(f2, yy);
  REQUIRE(lhs.size() == 15);
  for (std::size_t i = 0; i < 15; ++i) CHECK(lhs[i] == doctest::Approx(2.0 * a[i] - 3.0 * b[i]));

  // agrees with the differentiable op
  DiffArray fa({1, 5}, f1), ya({1, 3}, yy);
  const auto op = rowwise_outer(fa, ya);
  for (std::size_t i = 0; i < 15; ++i) CHECK(op.values()[i] == a[i]);
}

TEST_CASE("adversarial loss") {
  DiffArray zs({3, 1}, {0, 0, 0}), zt({2, 1}, {0, 0});
  CHECK(adversarial_loss(zs, zt).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  double prev = 1e9;
  for (double m : {1.0, 10.0, 40.0}) {
    const double v = adversarial_loss(DiffArray({2, 1}, {m, m}), DiffArray({2, 1}, {-m, -m})).item();
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-15);

  // small symmetric logits from a balanced batch stay near ln 2
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d(0.0, 0.3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> s(16), u(16);
    for (double& v : s) v = d(rng);
    for (double& v : u) v = d(rng);
    const double loss = adversarial_loss(DiffArray({16, 1}, s), DiffArray({16, 1}, u)).item();
    CHECK(loss >= 0.6);
    CHECK(loss <= 0.8);
  }
}

TEST_CASE("gradient through the reversal junction is -lambda times the plain gradient") {
  std::mt19937_64 rng(12);
  const Matrix x0 = random_matrix(rng, 6, 3);
  const Matrix w0 = random_matrix(rng, 3, 1);
  const double lambda = 0.7;
  auto loss_at = [&](const Matrix& x, bool reversed) {
    DiffArray xa = da(x, true);
    DiffArray in = reversed ? grad_reverse(xa, lambda) : xa;
    DiffArray logits = matmul(in, da(w0));
    return std::make_pair(adversarial_loss(slice_rows(logits, 0, 3), slice_rows(logits, 3, 6)), xa);
  };
  auto [loss, xa] = loss_at(x0, true);
  loss.backward();
  const double h = 1e-6;
  for (std::size_t k = 0; k < x0.data.size(); ++k) {
    Matrix up = x0, down = x0;
    up.data[k] += h;
    down.data[k] -= h;
    const double numeric = (loss_at(up, false).first.item() - loss_at(down, false).first.item()) / (2 * h);
    CHECK(xa.grad()[k] == doctest::Approx(-lambda * numeric).epsilon(1e-6).scale(1e-3));
  }
}
