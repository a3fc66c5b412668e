#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ldplab/simd/kernels.hpp"

using namespace ldplab;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Sizes around every vector width and its tails.
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 63, 64, 65, 127, 255, 1000};

double tol(double scale, std::size_t n) { return 1e-14 * scale * static_cast<double>(n + 1); }

}  // namespace

TEST_CASE("scalar table is always available and listed first") {
  const auto tables = simd::available_tables();
  REQUIRE(!tables.empty());
  CHECK(tables.front() == &simd::scalar_table());
  CHECK(simd::scalar_table().name == "scalar");
  bool active_listed = false;
  for (auto* t : tables) active_listed = active_listed || t == &simd::active();
  CHECK(active_listed);
}

TEST_CASE("vector kernels agree with the scalar reference") {
  std::mt19937_64 rng(42);
  const auto& ref = simd::scalar_table();
  for (const auto* t : simd::available_tables()) {
    CAPTURE(t->name);
    for (std::size_t n : kSizes) {
      CAPTURE(n);
      const auto a = random_vector(n, rng), b = random_vector(n, rng);
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol(scale + 1.0, n));

      auto y1 = b, y2 = b;
      t->axpy(0.7, a.data(), y1.data(), n);
      ref.axpy(0.7, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

      std::vector<double> h1(n), h2(n);
      t->hadamard(a.data(), b.data(), h1.data(), n);
      ref.hadamard(a.data(), b.data(), h2.data(), n);
      CHECK(h1 == h2);  // a single rounding per entry: bitwise

      CHECK(t->max_abs(a.data(), n) == ref.max_abs(a.data(), n));
    }
  }
}

TEST_CASE("hadamard may alias its output") {
  std::mt19937_64 rng(3);
  for (const auto* t : simd::available_tables()) {
    auto a = random_vector(37, rng);
    const auto b = random_vector(37, rng);
    std::vector<double> expect(37);
    for (std::size_t i = 0; i < 37; ++i) expect[i] = a[i] * b[i];
    t->hadamard(a.data(), b.data(), a.data(), 37);
    CHECK(a == expect);
  }
}

TEST_CASE("max_abs sees NaN and infinities") {
  for (const auto* t : simd::available_tables()) {
    CAPTURE(t->name);
    std::vector<double> v(19, 1.0);
    v[13] = -INFINITY;
    CHECK(t->max_abs(v.data(), v.size()) == INFINITY);
    v[13] = NAN;
    CHECK(!(t->max_abs(v.data(), v.size()) <= 1e8));
  }
}

TEST_CASE("gemv and gemm agree with the scalar reference") {
  std::mt19937_64 rng(7);
  const auto& ref = simd::scalar_table();
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {8, 8, 8}, {17, 9, 13}, {31, 64, 5}, {63, 63, 63}};
  for (const auto* t : simd::available_tables()) {
    CAPTURE(t->name);
    for (const auto& s : shapes) {
      const std::size_t rows = s[0], inner = s[1], cols = s[2];
      const auto A = random_vector(rows * inner, rng);
      const auto x = random_vector(inner, rng);
      std::vector<double> y1(rows), y2(rows);
      t->gemv(A.data(), rows, inner, x.data(), y1.data());
      ref.gemv(A.data(), rows, inner, x.data(), y2.data());
      for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(y1[i] - y2[i]) <= tol(10.0 * std::sqrt(double(inner)), inner));

      const std::size_t ldb = cols + 3, ldc = cols + 1;
      const auto B = random_vector(inner * ldb, rng);
      std::vector<double> C1(rows * ldc, -5.0), C2(rows * ldc, -5.0);
      t->gemm(A.data(), rows, inner, B.data(), ldb, cols, C1.data(), ldc);
      ref.gemm(A.data(), rows, inner, B.data(), ldb, cols, C2.data(), ldc);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < ldc; ++j) {
          if (j < cols) {
            CHECK(std::abs(C1[i * ldc + j] - C2[i * ldc + j]) <= tol(10.0 * std::sqrt(double(inner)), inner));
          } else {
            CHECK(C1[i * ldc + j] == -5.0);  // padding untouched
          }
        }
      }
    }
  }
}
