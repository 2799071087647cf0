#include <random>
#include <vector>

#include "doctest.h"
#include "ganda/kernels.hpp"

using namespace ganda::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  // include exact zeros so relu ties are exercised
  for (std::size_t i = 0; i < n; i += 7) v[i] = 0.0;
  return v;
}

// Every entry compared for exact equality.
void require_identical(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

}  // namespace

TEST_CASE("active table is one of the known tables") {
  const KernelTable& t = active();
  CHECK((t.name == scalar_table().name || (avx2_table() && t.name == avx2_table()->name)));
  CHECK(&active() == &active());
}

TEST_CASE("scalar gemm against a triple loop") {
  std::mt19937_64 rng(1);
  const std::size_t m = 5, n = 7, k = 3;
  auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
  std::vector<double> c(m * n, 1.0), expect(m * n, 1.0);
  scalar_table().gemm_nn(m, n, k, a.data(), b.data(), c.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) expect[i * n + j] += a[i * k + p] * b[p * n + j];
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-14));

  std::vector<double> ct(m * n, 0.0), expect_t(m * n, 0.0);
  auto at = random_vec(rng, k * m);
  scalar_table().gemm_tn(m, n, k, at.data(), b.data(), ct.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) expect_t[i * n + j] += at[p * m + i] * b[p * n + j];
  for (std::size_t i = 0; i < ct.size(); ++i) CHECK(ct[i] == doctest::Approx(expect_t[i]).epsilon(1e-14));
}

TEST_CASE("avx2 kernels are bit-identical to scalar") {
  const KernelTable* v = avx2_table();
  if (v == nullptr || !cpu_has_avx2()) {
    MESSAGE("AVX2 unavailable, skipping");
    return;
  }
  const KernelTable& s = scalar_table();
  std::mt19937_64 rng(42);
  // sizes straddle the 4-lane width and its remainders
  for (std::size_t m : {1u, 3u, 8u}) {
    for (std::size_t n : {1u, 3u, 4u, 5u, 9u, 17u, 32u}) {
      for (std::size_t k : {1u, 2u, 6u, 15u}) {
        auto a = random_vec(rng, m * k), b = random_vec(rng, k * n), c0 = random_vec(rng, m * n);
        auto cs = c0, cv = c0;
        s.gemm_nn(m, n, k, a.data(), b.data(), cs.data());
        v->gemm_nn(m, n, k, a.data(), b.data(), cv.data());
        require_identical(cs, cv);

        auto at = random_vec(rng, k * m);
        cs = c0;
        cv = c0;
        s.gemm_tn(m, n, k, at.data(), b.data(), cs.data());
        v->gemm_tn(m, n, k, at.data(), b.data(), cv.data());
        require_identical(cs, cv);

        auto bt = random_vec(rng, k * n);
        std::vector<double> ds(m * n), dv(m * n);
        s.sq_dist(m, n, k, a.data(), bt.data(), ds.data());
        v->sq_dist(m, n, k, a.data(), bt.data(), dv.data());
        require_identical(ds, dv);
      }
    }
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 31u, 100u}) {
    auto x = random_vec(rng, n), y0 = random_vec(rng, n), gy = random_vec(rng, n);
    auto ys = y0, yv = y0;
    s.axpy(n, 0.37, x.data(), ys.data());
    v->axpy(n, 0.37, x.data(), yv.data());
    require_identical(ys, yv);

    std::vector<double> rs(n), rv(n);
    s.relu(n, x.data(), rs.data());
    v->relu(n, x.data(), rv.data());
    require_identical(rs, rv);

    auto gs = y0, gv = y0;
    s.relu_backward(n, x.data(), gy.data(), gs.data());
    v->relu_backward(n, x.data(), gy.data(), gv.data());
    require_identical(gs, gv);

    auto ps = x, pv = x, vs = y0, vv = y0;
    s.sgd_momentum(n, 0.01, 0.9, 5e-4, ps.data(), gy.data(), vs.data());
    v->sgd_momentum(n, 0.01, 0.9, 5e-4, pv.data(), gy.data(), vv.data());
    require_identical(ps, pv);
    require_identical(vs, vv);
  }
}
