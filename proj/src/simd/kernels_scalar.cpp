#include "ldplab/simd/kernels.hpp"

#include <cmath>

namespace ldplab::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void hadamard_scalar(const double* a, const double* b, double* out, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void gemv_scalar(const double* A, std::size_t rows, std::size_t cols, const double* x,
                 double* y) noexcept {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(A + r * cols, x, cols);
}

void gemm_scalar(const double* A, std::size_t rows, std::size_t inner, const double* B,
                 std::size_t ldb, std::size_t cols, double* C, std::size_t ldc) noexcept {
  for (std::size_t i = 0; i < rows; ++i) {
    double* c = C + i * ldc;
    for (std::size_t j = 0; j < cols; ++j) c[j] = 0.0;
    const double* a = A + i * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a[k];
      if (aik == 0.0) continue;
      axpy_scalar(aik, B + k * ldb, c, cols);
    }
  }
}

double max_abs_scalar(const double* x, std::size_t n) noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::fabs(x[i]);
    if (v > m || std::isnan(v)) m = v;
  }
  return m;
}

constexpr KernelTable kScalar{
    "scalar", dot_scalar, axpy_scalar, hadamard_scalar, gemv_scalar, gemm_scalar, max_abs_scalar,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace ldplab::simd
