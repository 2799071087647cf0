#include <cstdlib>
#include <string_view>

#include "ganda/kernels.hpp"

namespace ganda::kernels {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

const KernelTable& select() {
  if (const char* env = std::getenv("GANDA_SIMD"); env != nullptr) {
    if (std::string_view(env) == "scalar") return scalar_table();
  }
  if (const KernelTable* t = avx2_table(); t != nullptr && cpu_has_avx2()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace ganda::kernels
