#pragma once
// Dense float64 inner loops used by the differentiation core and the losses.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2 implementation. The AVX2 kernels vectorize across the contiguous
// output index only and keep the per-element accumulation order of the scalar
// code, and neither variant is compiled with FMA contraction, so both produce
// bit-identical results. The active table is chosen once at startup from CPUID
// (override with GANDA_SIMD=scalar).

#include <cstddef>
#include <string_view>

namespace ganda::kernels {

struct KernelTable {
  std::string_view name;

  // C[M x N] += A[M x K] * B[K x N], all row-major.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // C[M x N] += A^T * B where A is [K x M] and B is [K x N].
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // y = max(x, 0)
  void (*relu)(std::size_t n, const double* x, double* y);
  // gx += (x > 0) ? gy : 0
  void (*relu_backward)(std::size_t n, const double* x, const double* gy, double* gx);
  // v = momentum * v + g + weight_decay * p;  p = p - lr * v
  void (*sgd_momentum)(std::size_t n, double lr, double momentum, double weight_decay,
                       double* p, const double* g, double* v);
  // D[i, j] = sum_k (A[i, k] - Bt[k, j])^2 with A [N1 x K] and Bt [K x N2].
  void (*sq_dist)(std::size_t n1, std::size_t n2, std::size_t k, const double* a,
                  const double* bt, double* d);
};

const KernelTable& scalar_table();

// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_has_avx2();

// Table selected at first use; stable for the lifetime of the process.
const KernelTable& active();

}  // namespace ganda::kernels
