// Compiled with -mavx2 -ffp-contract=off. Only reached after a CPUID check.
#include "ganda/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>

namespace ganda::kernels {
namespace {

inline void row_axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + j));
    _mm256_storeu_pd(y + j, _mm256_add_pd(_mm256_loadu_pd(y + j), prod));
  }
  for (; j < n; ++j) y[j] += alpha * x[j];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) row_axpy(n, a[i * k + p], b + p * n, crow);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) row_axpy(n, a[p * m + i], b + p * n, crow);
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) { row_axpy(n, alpha, x, y); }

void relu(std::size_t n, const double* x, double* y) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d mask = _mm256_cmp_pd(vx, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(y + i, _mm256_and_pd(vx, mask));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::size_t n, const double* x, const double* gy, double* gx) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d pass = _mm256_and_pd(_mm256_loadu_pd(gy + i), mask);
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), pass));
  }
  for (; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
}

void sgd_momentum(std::size_t n, double lr, double momentum, double weight_decay, double* p,
                  const double* g, double* v) {
  const __m256d vm = _mm256_set1_pd(momentum);
  const __m256d vwd = _mm256_set1_pd(weight_decay);
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vp = _mm256_loadu_pd(p + i);
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(vm, _mm256_loadu_pd(v + i)), _mm256_loadu_pd(g + i));
    vv = _mm256_add_pd(vv, _mm256_mul_pd(vwd, vp));
    _mm256_storeu_pd(v + i, vv);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(vp, _mm256_mul_pd(vlr, vv)));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + g[i] + weight_decay * p[i];
    p[i] = p[i] - lr * v[i];
  }
}

void sq_dist(std::size_t n1, std::size_t n2, std::size_t k, const double* a, const double* bt,
             double* d) {
  for (std::size_t i = 0; i < n1; ++i) {
    double* drow = d + i * n2;
    for (std::size_t j = 0; j < n2; ++j) drow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const __m256d va = _mm256_set1_pd(aip);
      const double* brow = bt + p * n2;
      std::size_t j = 0;
      for (; j + 4 <= n2; j += 4) {
        const __m256d diff = _mm256_sub_pd(va, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(drow + j,
                         _mm256_add_pd(_mm256_loadu_pd(drow + j), _mm256_mul_pd(diff, diff)));
      }
      for (; j < n2; ++j) {
        const double diff = aip - brow[j];
        drow[j] += diff * diff;
      }
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", gemm_nn, gemm_tn,      axpy,
                                 relu,   relu_backward, sgd_momentum, sq_dist};
  return &table;
}

}  // namespace ganda::kernels

#else

namespace ganda::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace ganda::kernels

#endif
