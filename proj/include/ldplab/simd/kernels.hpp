#pragma once

// Dense double-precision kernels used by every inner loop of the library.
//
// Each instruction-set variant fills a KernelTable; `active()` picks the best
// variant the running CPU supports (override with LDPLAB_SIMD=scalar|avx2|neon).
// Variants agree to rounding, not bitwise: summation order differs. Within one
// process the table never changes, so runs stay bitwise reproducible.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace ldplab::simd {

struct KernelTable {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n) noexcept;
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n) noexcept;
  // out[i] = a[i] * b[i]; out may alias a or b
  void (*hadamard)(const double* a, const double* b, double* out, std::size_t n) noexcept;
  // y = A x, A row-major rows x cols; y must not alias x
  void (*gemv)(const double* A, std::size_t rows, std::size_t cols, const double* x,
               double* y) noexcept;
  // C = A B; A row-major rows x inner (leading dim inner), B inner x cols with
  // leading dim ldb, C rows x cols with leading dim ldc
  void (*gemm)(const double* A, std::size_t rows, std::size_t inner, const double* B,
               std::size_t ldb, std::size_t cols, double* C, std::size_t ldc) noexcept;
  double (*max_abs)(const double* x, std::size_t n) noexcept;
};

const KernelTable& scalar_table() noexcept;
// nullptr when the variant is not compiled in or the CPU lacks the extension.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void hadamard(std::span<const double> a, std::span<const double> b,
                     std::span<double> out) noexcept {
  active().hadamard(a.data(), b.data(), out.data(), a.size());
}
inline void gemv(std::span<const double> A, std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y) noexcept {
  active().gemv(A.data(), rows, cols, x.data(), y.data());
}
inline double max_abs(std::span<const double> x) noexcept {
  return active().max_abs(x.data(), x.size());
}

}  // namespace ldplab::simd
