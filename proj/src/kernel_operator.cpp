#include "ldplab/kernel_operator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "ldplab/error.hpp"
#include "ldplab/simd/kernels.hpp"

namespace ldplab {

EllipticCoefficients EllipticCoefficients::identity() {
  return {[](const Point&) { return Matrix2{{{1.0, 0.0}, {0.0, 1.0}}}; }, 1.0, "identity"};
}

EllipticCoefficients EllipticCoefficients::constant(const Matrix2& b, double kappa) {
  std::ostringstream d;
  d << "constant[[" << b[0][0] << "," << b[0][1] << "],[" << b[1][0] << "," << b[1][1] << "]]";
  return {[b](const Point&) { return b; }, kappa, d.str()};
}

EllipticCoefficients EllipticCoefficients::isotropic(std::function<double(const Point&)> a,
                                                     double kappa, std::string description) {
  return {[a = std::move(a)](const Point& x) {
            const double v = a(x);
            return Matrix2{{{v, 0.0}, {0.0, v}}};
          },
          kappa, std::move(description)};
}

namespace {

struct Stencil {
  std::array<long, 2> index{-1, -1};
  std::array<double, 2> coeff{0.0, 0.0};
};

void check_coefficients_at(const Grid& grid, const EllipticCoefficients& c, const Point& x) {
  const Matrix2 b = c.b(x);
  const int d = grid.dim();
  if (d == 2) {
    const double scale = std::max({1.0, std::fabs(b[0][1]), std::fabs(b[1][0])});
    if (std::fabs(b[0][1] - b[1][0]) > 1e-12 * scale) {
      std::ostringstream msg;
      msg << "diffusion matrix is not symmetric at x=(" << x[0] << "," << x[1] << "): b12=" << b[0][1]
          << " b21=" << b[1][0];
      throw AssumptionViolation(msg.str());
    }
  }
  // Extreme eigenvalues of the symmetric part bound b_ij g_i g_j / |g|^2.
  double lo = b[0][0];
  double hi = b[0][0];
  if (d == 2) {
    const double off = 0.5 * (b[0][1] + b[1][0]);
    const double mean = 0.5 * (b[0][0] + b[1][1]);
    const double rad = std::hypot(0.5 * (b[0][0] - b[1][1]), off);
    lo = mean - rad;
    hi = mean + rad;
  }
  const double tol = 1e-12;
  if (!(lo >= c.kappa * (1.0 - tol)) || !(hi <= (1.0 + tol) / c.kappa)) {
    std::ostringstream msg;
    msg << "ellipticity violated at x=(" << x[0] << "," << x[1] << "): spectrum [" << lo << ","
        << hi << "] outside [" << c.kappa << "," << 1.0 / c.kappa << "]";
    throw AssumptionViolation(msg.str());
  }
}

}  // namespace

KernelOperator assemble_operator(const Grid& grid, const EllipticCoefficients& coeffs) {
  if (grid.size() == 0) throw InvalidGrid("grid has no interior nodes");
  if (!(coeffs.kappa > 0.0 && coeffs.kappa <= 1.0)) {
    throw AssumptionViolation("ellipticity constant kappa must lie in (0, 1]");
  }
  const int d = grid.dim();
  const std::size_t n = grid.size();
  const int c0 = grid.cells(0);
  const int c1 = d == 2 ? grid.cells(1) : 0;

  for (int i = 0; i <= c0; ++i) {
    for (int j = 0; j <= c1; ++j) check_coefficients_at(grid, coeffs, grid.position({i, j}));
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  auto difference = [&](std::array<int, 2> p, int axis, int dir) {
    // dir = +1: (u(p+e) - u(p)) / h; dir = -1: (u(p) - u(p-e)) / h
    std::array<int, 2> q = p;
    q[axis] += dir;
    const double inv_h = 1.0 / grid.spacing(axis);
    Stencil s;
    const long ip = grid.interior_index(p);
    const long iq = grid.interior_index(q);
    s.index = {ip, iq};
    s.coeff = {-dir * inv_h, dir * inv_h};
    return s;
  };
  for (int dir : {+1, -1}) {
    const int start = dir > 0 ? 0 : 1;
    for (int i = start; i < start + c0; ++i) {
      const int j_count = d == 2 ? c1 : 1;
      for (int jj = 0; jj < j_count; ++jj) {
        const int j = d == 2 ? start + jj : 0;
        const std::array<int, 2> p{i, j};
        const Matrix2 b = coeffs.b(grid.position(p));
        std::array<Stencil, 2> grad;
        for (int a = 0; a < d; ++a) grad[a] = difference(p, a, dir);
        for (int a = 0; a < d; ++a) {
          for (int bb = 0; bb < d; ++bb) {
            const double w = a == bb ? b[a][a] : 0.5 * (b[a][bb] + b[bb][a]);
            if (w == 0.0) continue;
            for (int u = 0; u < 2; ++u) {
              if (grad[a].index[u] < 0) continue;
              for (int v = 0; v < 2; ++v) {
                if (grad[bb].index[v] < 0) continue;
                A(grad[a].index[u], grad[bb].index[v]) -=
                    0.5 * w * grad[a].coeff[u] * grad[bb].coeff[v];
              }
            }
          }
        }
      }
    }
  }
  A = 0.5 * (A + A.transpose()).eval();

  KernelOperator op;
  op.grid_ = grid;
  op.kappa_ = coeffs.kappa;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double v = A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (v != 0.0) op.entries_.push_back({r, c, v});
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
  if (solver.info() != Eigen::Success) {
    throw AssumptionViolation("eigen-decomposition of the elliptic operator failed");
  }
  const auto& evals = solver.eigenvalues();
  const auto& evecs = solver.eigenvectors();
  op.mu_.resize(n);
  op.modes_.resize(n * n);
  op.modes_t_.resize(n * n);
  for (std::size_t m = 0; m < n; ++m) {
    // Eigen sorts ascending; mode 0 is the least negative eigenvalue.
    const auto src = static_cast<Eigen::Index>(n - 1 - m);
    op.mu_[m] = evals(src);
    if (!(op.mu_[m] < 0.0)) {
      throw AssumptionViolation("discrete operator is not negative definite");
    }
    for (std::size_t node = 0; node < n; ++node) {
      const double v = evecs(static_cast<Eigen::Index>(node), src);
      op.modes_[node * n + m] = v;
      op.modes_t_[m * n + node] = v;
    }
  }
  return op;
}

std::vector<double> KernelOperator::dense_matrix() const {
  const std::size_t n = size();
  std::vector<double> out(n * n, 0.0);
  for (const auto& e : entries_) out[e.row * n + e.col] = e.value;
  return out;
}

void KernelOperator::apply(double t, std::span<const double> in, std::span<double> out) const {
  if (!(t >= 0.0)) throw DomainError("kernel_apply requires t >= 0");
  if (in.size() != size() || out.size() != size()) {
    throw DomainError("kernel_apply: field size does not match the grid");
  }
  if (t == 0.0) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  SemigroupStep step(*this, t);
  step.apply(in, out);
}

std::vector<double> KernelOperator::apply(double t, std::span<const double> in) const {
  std::vector<double> out(size());
  apply(t, in, out);
  return out;
}

void KernelOperator::central_difference(int axis, std::span<const double> in,
                                        std::span<double> out) const {
  const std::size_t n = size();
  const double inv2h = 0.5 / grid_.spacing(axis);
  if (grid_.dim() == 1) {
    for (std::size_t k = 0; k < n; ++k) {
      const double right = k + 1 < n ? in[k + 1] : 0.0;
      const double left = k > 0 ? in[k - 1] : 0.0;
      out[k] = (right - left) * inv2h;
    }
    return;
  }
  const std::size_t n1 = static_cast<std::size_t>(grid_.interior_per_axis(1));
  const std::size_t n0 = static_cast<std::size_t>(grid_.interior_per_axis(0));
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) {
      const std::size_t k = i * n1 + j;
      double right = 0.0;
      double left = 0.0;
      if (axis == 0) {
        if (i + 1 < n0) right = in[k + n1];
        if (i > 0) left = in[k - n1];
      } else {
        if (j + 1 < n1) right = in[k + 1];
        if (j > 0) left = in[k - 1];
      }
      out[k] = (right - left) * inv2h;
    }
  }
}

std::vector<std::vector<double>> KernelOperator::grad_apply(double t,
                                                            std::span<const double> field) const {
  if (t < 0.0) throw DomainError("kernel_grad_apply requires t > 0");
  if (t == 0.0) throw SingularKernel("kernel_grad_apply: gradient of G_t is singular at t = 0");
  if (field.size() != size()) throw DomainError("kernel_grad_apply: field size mismatch");
  SemigroupStep step(*this, t);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(grid_.dim()),
                                       std::vector<double>(size()));
  for (int a = 0; a < grid_.dim(); ++a) {
    auto& r = out[static_cast<std::size_t>(a)];
    central_difference(a, field, r);
    for (double& v : r) v = -v;
    step.apply(r, r);
  }
  return out;
}

double KernelOperator::kernel(double t, std::size_t x, std::size_t y) const {
  if (!(t >= 0.0)) throw DomainError("kernel requires t >= 0");
  const std::size_t n = size();
  double s = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    s += std::exp(mu_[m] * t) * (modes_[x * n + m] * modes_[y * n + m]);
  }
  return s / grid_.cell_volume();
}

std::vector<double> KernelOperator::kernel_row(double t, std::size_t x) const {
  if (!(t >= 0.0)) throw DomainError("kernel requires t >= 0");
  const std::size_t n = size();
  std::vector<double> coeff(n);
  const double inv_vol = 1.0 / grid_.cell_volume();
  for (std::size_t m = 0; m < n; ++m) coeff[m] = std::exp(mu_[m] * t) * modes_[x * n + m] * inv_vol;
  std::vector<double> row(n);
  simd::gemv(modes_, n, n, coeff, row);
  return row;
}

std::vector<double> KernelOperator::kernel_time_derivative_row(double t, std::size_t x) const {
  if (!(t >= 0.0)) throw DomainError("kernel requires t >= 0");
  const std::size_t n = size();
  std::vector<double> coeff(n);
  const double inv_vol = 1.0 / grid_.cell_volume();
  for (std::size_t m = 0; m < n; ++m) {
    coeff[m] = mu_[m] * std::exp(mu_[m] * t) * modes_[x * n + m] * inv_vol;
  }
  std::vector<double> row(n);
  simd::gemv(modes_, n, n, coeff, row);
  return row;
}

SemigroupStep::SemigroupStep(const KernelOperator& op, double t)
    : op_(&op), t_(t), decay_(op.size()), scratch_(op.size()) {
  if (!(t >= 0.0)) throw DomainError("semigroup step requires t >= 0");
  for (std::size_t m = 0; m < op.size(); ++m) decay_[m] = std::exp(op.mu_[m] * t);
}

void SemigroupStep::apply(std::span<const double> in, std::span<double> out) {
  const std::size_t n = op_->size();
  const auto& k = simd::active();
  k.gemv(op_->modes_t_.data(), n, n, in.data(), scratch_.data());
  k.hadamard(scratch_.data(), decay_.data(), scratch_.data(), n);
  k.gemv(op_->modes_.data(), n, n, scratch_.data(), out.data());
}

void SemigroupStep::apply_columns(std::span<double> matrix, std::size_t ld, std::size_t cols) {
  const std::size_t n = op_->size();
  if (cols == 0) return;
  scratch_matrix_.resize(n * cols);
  const auto& k = simd::active();
  k.gemm(op_->modes_t_.data(), n, n, matrix.data(), ld, cols, scratch_matrix_.data(), cols);
  for (std::size_t m = 0; m < n; ++m) {
    const double f = decay_[m];
    double* row = scratch_matrix_.data() + m * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] *= f;
  }
  k.gemm(op_->modes_.data(), n, n, scratch_matrix_.data(), cols, cols, matrix.data(), ld);
}

void write_eigen_csv(const KernelOperator& op, std::ostream& out) {
  out << "index,eigenvalue\n";
  out.precision(17);
  const auto mu = op.eigenvalues();
  for (std::size_t i = 0; i < mu.size(); ++i) out << (i + 1) << ',' << mu[i] << '\n';
}

}  // namespace ldplab
