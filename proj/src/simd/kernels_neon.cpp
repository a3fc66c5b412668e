// AArch64 Advanced SIMD variant. NEON is baseline on AArch64, so no runtime check.
#include "ldplab/simd/kernels.hpp"

#include <arm_neon.h>

#include <cmath>
#include <limits>

namespace ldplab::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) noexcept {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void hadamard_neon(const double* a, const double* b, double* out, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void gemv_neon(const double* A, std::size_t rows, std::size_t cols, const double* x,
               double* y) noexcept {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(A + r * cols, x, cols);
}

void gemm_neon(const double* A, std::size_t rows, std::size_t inner, const double* B,
               std::size_t ldb, std::size_t cols, double* C, std::size_t ldc) noexcept {
  for (std::size_t i = 0; i < rows; ++i) {
    double* c = C + i * ldc;
    for (std::size_t j = 0; j < cols; ++j) c[j] = 0.0;
    for (std::size_t k = 0; k < inner; ++k) axpy_neon(A[i * inner + k], B + k * ldb, c, cols);
  }
}

double max_abs_neon(const double* x, std::size_t n) noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::fabs(x[i]);
    if (std::isnan(v)) return v;
    if (v > m) m = v;
  }
  return m;
}

constexpr KernelTable kNeon{
    "neon", dot_neon, axpy_neon, hadamard_neon, gemv_neon, gemm_neon, max_abs_neon,
};

}  // namespace

const KernelTable& neon_table_unchecked() noexcept { return kNeon; }

}  // namespace ldplab::simd
