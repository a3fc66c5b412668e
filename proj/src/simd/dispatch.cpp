#include <cstdlib>
#include <string_view>

#include "ldplab/simd/kernels.hpp"

namespace ldplab::simd {

#if defined(LDPLAB_HAVE_AVX2)
const KernelTable& avx2_table_unchecked() noexcept;
#endif
#if defined(LDPLAB_HAVE_NEON)
const KernelTable& neon_table_unchecked() noexcept;
#endif

const KernelTable* avx2_table() noexcept {
#if defined(LDPLAB_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(LDPLAB_HAVE_NEON)
  return &neon_table_unchecked();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (const auto* t = avx2_table()) out.push_back(t);
  if (const auto* t = neon_table()) out.push_back(t);
  return out;
}

namespace {

const KernelTable& select() noexcept {
  const KernelTable* best = &scalar_table();
  if (const auto* t = neon_table()) best = t;
  if (const auto* t = avx2_table()) best = t;
  if (const char* env = std::getenv("LDPLAB_SIMD")) {
    const std::string_view want{env};
    for (const auto* t : {&scalar_table(), avx2_table(), neon_table()}) {
      if (t != nullptr && t->name == want) return *t;
    }
  }
  return *best;
}

}  // namespace

const KernelTable& active() noexcept {
  static const KernelTable& table = select();
  return table;
}

}  // namespace ldplab::simd
