#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ldplab/grid.hpp"

namespace ldplab {

using Matrix2 = std::array<std::array<double, 2>, 2>;

// Diffusion matrix b(x) of A = d_i(b_ij d_j) with its ellipticity constant:
// kappa |g|^2 <= b_ij g_i g_j <= |g|^2 / kappa.
struct EllipticCoefficients {
  std::function<Matrix2(const Point&)> b;
  double kappa = 1.0;
  std::string description;

  static EllipticCoefficients identity();
  static EllipticCoefficients constant(const Matrix2& b, double kappa);
  // b(x) = a(x) I
  static EllipticCoefficients isotropic(std::function<double(const Point&)> a, double kappa,
                                        std::string description);
};

struct SparseEntry {
  std::size_t row;
  std::size_t col;
  double value;
};

// Discrete Dirichlet operator A in divergence form with its full eigen-decomposition.
// Immutable after construction; safe to share across threads.
//
// Assembly: A = -1/2 [ (D+)^T B (D+) + (D-)^T B (D-) ], where D+ / D- are the
// forward / backward difference gradients anchored at each node and B = b(node).
// With b = I this is the standard (2d+1)-point Laplacian.
class KernelOperator {
 public:
  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return grid_.size(); }
  double kappa() const noexcept { return kappa_; }

  // Eigenvalues, all negative, ordered from the least negative (mu_1) down.
  std::span<const double> eigenvalues() const noexcept { return mu_; }
  // Orthonormal eigenvectors, row-major node x mode.
  std::span<const double> eigenvectors() const noexcept { return modes_; }
  double eigenvector(std::size_t node, std::size_t mode) const noexcept {
    return modes_[node * size() + mode];
  }

  std::span<const SparseEntry> matrix() const noexcept { return entries_; }
  std::vector<double> dense_matrix() const;

  // out = e^{tA} in (kernel_apply). t >= 0; in and out may alias.
  void apply(double t, std::span<const double> in, std::span<double> out) const;
  std::vector<double> apply(double t, std::span<const double> in) const;

  // For each axis i, x -> sum_y d_{y_i} G_t(x,y) field(y) h^d (kernel_grad_apply).
  // Uses the centered difference with zero extension, whose transpose is its negative:
  // result_i = -e^{tA} D_i field. Requires t > 0.
  std::vector<std::vector<double>> grad_apply(double t, std::span<const double> field) const;

  // Centered difference along `axis` with zero extension outside the interior.
  void central_difference(int axis, std::span<const double> in, std::span<double> out) const;

  // Kernel density G_t(x, y) = (e^{tA})_{xy} / h^d, exactly symmetric in (x, y).
  double kernel(double t, std::size_t x, std::size_t y) const;
  std::vector<double> kernel_row(double t, std::size_t x) const;
  // d/dt G_t(x, .) = (A e^{tA})_{x.} / h^d
  std::vector<double> kernel_time_derivative_row(double t, std::size_t x) const;

 private:
  friend KernelOperator assemble_operator(const Grid& grid, const EllipticCoefficients& coeffs);
  friend class SemigroupStep;

  Grid grid_;
  double kappa_ = 1.0;
  std::vector<SparseEntry> entries_;
  std::vector<double> mu_;
  std::vector<double> modes_;      // node x mode
  std::vector<double> modes_t_;    // mode x node
};

// Throws AssumptionViolation when b is asymmetric or leaves the ellipticity band at a node.
KernelOperator assemble_operator(const Grid& grid, const EllipticCoefficients& coeffs);

// e^{tA} for one fixed t with its own scratch space. Cheap to build; one per worker.
class SemigroupStep {
 public:
  SemigroupStep(const KernelOperator& op, double t);

  double time() const noexcept { return t_; }
  // out = e^{tA} in; in and out may alias.
  void apply(std::span<const double> in, std::span<double> out);
  // Applies e^{tA} to the first `cols` columns of a row-major size() x ld matrix, in place.
  void apply_columns(std::span<double> matrix, std::size_t ld, std::size_t cols);

 private:
  const KernelOperator* op_;
  double t_;
  std::vector<double> decay_;
  std::vector<double> scratch_;
  std::vector<double> scratch_matrix_;
};

// "index,eigenvalue" rows, index starting at 1.
void write_eigen_csv(const KernelOperator& op, std::ostream& out);

}  // namespace ldplab
