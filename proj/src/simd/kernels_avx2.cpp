// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "ldplab/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace ldplab::simd {
namespace {

inline double hsum(__m256d v) noexcept {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void hadamard_avx2(const double* a, const double* b, double* out, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

// Four rows per pass so each load of x feeds four accumulators.
void gemv_avx2(const double* A, std::size_t rows, std::size_t cols, const double* x,
               double* y) noexcept {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* a0 = A + r * cols;
    const double* a1 = a0 + cols;
    const double* a2 = a1 + cols;
    const double* a3 = a2 + cols;
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();
    __m256d s3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + c), vx, s0);
      s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + c), vx, s1);
      s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a2 + c), vx, s2);
      s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a3 + c), vx, s3);
    }
    double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
    for (; c < cols; ++c) {
      t0 += a0[c] * x[c];
      t1 += a1[c] * x[c];
      t2 += a2[c] * x[c];
      t3 += a3[c] * x[c];
    }
    y[r] = t0;
    y[r + 1] = t1;
    y[r + 2] = t2;
    y[r + 3] = t3;
  }
  for (; r < rows; ++r) y[r] = dot_avx2(A + r * cols, x, cols);
}

void gemm_avx2(const double* A, std::size_t rows, std::size_t inner, const double* B,
               std::size_t ldb, std::size_t cols, double* C, std::size_t ldc) noexcept {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* a = A + i * inner;
    double* c = C + i * ldc;
    std::size_t j = 0;
    // 16-wide column blocks held in registers across the whole k loop.
    for (; j + 16 <= cols; j += 16) {
      __m256d c0 = _mm256_setzero_pd();
      __m256d c1 = _mm256_setzero_pd();
      __m256d c2 = _mm256_setzero_pd();
      __m256d c3 = _mm256_setzero_pd();
      for (std::size_t k = 0; k < inner; ++k) {
        const __m256d va = _mm256_set1_pd(a[k]);
        const double* b = B + k * ldb + j;
        c0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b), c0);
        c1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + 4), c1);
        c2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + 8), c2);
        c3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + 12), c3);
      }
      _mm256_storeu_pd(c + j, c0);
      _mm256_storeu_pd(c + j + 4, c1);
      _mm256_storeu_pd(c + j + 8, c2);
      _mm256_storeu_pd(c + j + 12, c3);
    }
    for (; j + 4 <= cols; j += 4) {
      __m256d c0 = _mm256_setzero_pd();
      for (std::size_t k = 0; k < inner; ++k) {
        c0 = _mm256_fmadd_pd(_mm256_set1_pd(a[k]), _mm256_loadu_pd(B + k * ldb + j), c0);
      }
      _mm256_storeu_pd(c + j, c0);
    }
    for (; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += a[k] * B[k * ldb + j];
      c[j] = s;
    }
  }
}

double max_abs_avx2(const double* x, std::size_t n) noexcept {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  __m256d nan = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    nan = _mm256_or_pd(nan, _mm256_cmp_pd(v, v, _CMP_UNORD_Q));
    m = _mm256_max_pd(m, _mm256_andnot_pd(sign, v));
  }
  if (_mm256_movemask_pd(nan) != 0) return std::numeric_limits<double>::quiet_NaN();
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double r = lanes[0];
  for (int l = 1; l < 4; ++l) r = lanes[l] > r ? lanes[l] : r;
  for (; i < n; ++i) {
    const double v = std::fabs(x[i]);
    if (std::isnan(v)) return v;
    if (v > r) r = v;
  }
  return r;
}

constexpr KernelTable kAvx2{
    "avx2", dot_avx2, axpy_avx2, hadamard_avx2, gemv_avx2, gemm_avx2, max_abs_avx2,
};

}  // namespace

const KernelTable& avx2_table_unchecked() noexcept { return kAvx2; }

}  // namespace ldplab::simd
