#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "ldplab/error.hpp"
#include "ldplab/grid.hpp"
#include "ldplab/kernel_estimates.hpp"
#include "ldplab/kernel_operator.hpp"

using namespace ldplab;

namespace {

std::vector<double> random_field(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Eigen::MatrixXd dense(const KernelOperator& op) {
  const auto d = op.dense_matrix();
  const auto n = static_cast<Eigen::Index>(op.size());
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(d.data(), n, n);
}

}  // namespace

TEST_CASE("uniform grids count interior nodes") {
  const Grid g1 = build_grid_1d(0.0, 1.0, 64);
  CHECK(g1.dim() == 1);
  CHECK(g1.size() == 63);
  CHECK(g1.spacing(0) == doctest::Approx(1.0 / 64));
  const Grid g2 = build_grid_2d(0.0, 1.0, 16);
  CHECK(g2.size() == 15 * 15);
  CHECK(g2.cell_volume() == doctest::Approx(1.0 / 256));
  CHECK_THROWS_AS(build_grid_1d(0.0, 1.0, 1), InvalidGrid);
  CHECK_THROWS_AS(build_grid_1d(1.0, 1.0, 8), InvalidGrid);
}

TEST_CASE("grid indexing is row-major with axis 0 slowest") {
  const Grid g = build_grid_2d(0.0, 1.0, 4);
  CHECK(g.interior_index({1, 1}) == 0);
  CHECK(g.interior_index({1, 2}) == 1);
  CHECK(g.interior_index({2, 1}) == 3);
  CHECK(g.interior_index({0, 1}) == -1);
  CHECK(g.interior_index({1, 4}) == -1);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.interior_index(g.interior_node(i)) == long(i));
  CHECK(g.nearest_interior({0.49, 0.76}) == std::size_t(g.interior_index({2, 3})));
}

TEST_CASE("identity coefficients give the three-point Laplacian") {
  const Grid g = build_grid_1d(0.0, 1.0, 8);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto A = dense(op);
  const double h2 = 1.0 / 64.0;
  for (int i = 0; i < 7; ++i) {
    CHECK(A(i, i) == doctest::Approx(-2.0 / h2));
    if (i + 1 < 7) {
      CHECK(A(i, i + 1) == doctest::Approx(1.0 / h2));
      CHECK(A(i + 1, i) == doctest::Approx(1.0 / h2));
    }
  }
  for (double mu : op.eigenvalues()) CHECK(mu < 0.0);
  for (std::size_t i = 1; i < op.size(); ++i) CHECK(op.eigenvalues()[i] <= op.eigenvalues()[i - 1]);
  // discrete Dirichlet spectrum -4/h^2 sin^2(j pi h / 2)
  for (std::size_t j = 0; j < op.size(); ++j) {
    const double exact = -4.0 / h2 * std::pow(std::sin((j + 1) * M_PI / 16.0), 2);
    CHECK(op.eigenvalues()[j] == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("asymmetric or degenerate diffusion matrices are rejected") {
  const Grid g = build_grid_2d(0.0, 1.0, 6);
  CHECK_THROWS_AS(assemble_operator(g, EllipticCoefficients::constant({{{1.0, 0.3}, {0.1, 1.0}}}, 0.5)),
                  AssumptionViolation);
  CHECK_THROWS_AS(assemble_operator(g, EllipticCoefficients::constant({{{0.1, 0.0}, {0.0, 1.0}}}, 0.5)),
                  AssumptionViolation);
  auto bad = EllipticCoefficients::isotropic([](const Point& x) { return x[0] < 0.5 ? 1.0 : 5.0; }, 0.5, "jump");
  CHECK_THROWS_AS(assemble_operator(g, bad), AssumptionViolation);
}

TEST_CASE("scaling the diffusion matrix scales the spectrum") {
  const Grid g = build_grid_2d(0.0, 1.0, 8);
  const auto lap = assemble_operator(g, EllipticCoefficients::identity());
  const auto two = assemble_operator(g, EllipticCoefficients::constant({{{2.0, 0.0}, {0.0, 2.0}}}, 0.5));
  for (std::size_t i = 0; i < lap.size(); ++i) {
    CHECK(two.eigenvalues()[i] == doctest::Approx(2.0 * lap.eigenvalues()[i]).epsilon(1e-12));
  }
}

TEST_CASE("eigenvalues stay inside the ellipticity band of the Laplacian spectrum") {
  const Grid g = build_grid_2d(0.0, 1.0, 10);
  const double kappa = 0.5;
  const auto lap = assemble_operator(g, EllipticCoefficients::identity());
  const auto var = assemble_operator(
      g, EllipticCoefficients::isotropic([](const Point& x) { return 1.0 + 0.8 * x[0] * x[1]; }, kappa, "bilinear"));
  for (std::size_t n = 0; n < lap.size(); ++n) {
    const double lam = -lap.eigenvalues()[n], mu = -var.eigenvalues()[n];
    CHECK(mu >= kappa * lam * (1 - 1e-12));
    CHECK(mu <= lam / kappa * (1 + 1e-12));
  }
}

TEST_CASE("kernel_apply: identity at t = 0, eigenfunction decay, semigroup, domain") {
  const Grid g = build_grid_1d(0.0, 1.0, 64);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto xi = random_field(op.size(), 1);
  CHECK(max_diff(op.apply(0.0, xi), xi) <= 1e-13);

  std::vector<double> s(op.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(M_PI * g.interior_position(i)[0]);
  const double t = 0.07;
  const auto out = op.apply(t, s);
  const double decay = std::exp(op.eigenvalues()[0] * t);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(out[i] == doctest::Approx(decay * s[i]).epsilon(1e-12));

  const auto a = op.apply(0.03, op.apply(0.05, xi));
  const auto b = op.apply(0.08, xi);
  CHECK(max_diff(a, b) <= 1e-12);
  CHECK_THROWS_AS(op.apply(-1.0, xi), DomainError);
}

TEST_CASE("kernel_apply matches the dense matrix exponential") {
  const Grid g = build_grid_2d(0.0, 1.0, 6);
  const auto op = assemble_operator(
      g, EllipticCoefficients::isotropic([](const Point& x) { return 1.5 + std::sin(3 * x[0]) * x[1]; }, 0.4, "smooth"));
  const Eigen::MatrixXd A = dense(op);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const double t = 0.01;
  const Eigen::MatrixXd E = es.eigenvectors() * (es.eigenvalues() * t).array().exp().matrix().asDiagonal() *
                            es.eigenvectors().transpose();
  const auto xi = random_field(op.size(), 5);
  const Eigen::VectorXd ref = E * Eigen::Map<const Eigen::VectorXd>(xi.data(), xi.size());
  const auto out = op.apply(t, xi);
  for (std::size_t i = 0; i < xi.size(); ++i) CHECK(out[i] == doctest::Approx(ref(i)).epsilon(1e-10));
}

TEST_CASE("kernel is symmetric and sub-Markov") {
  for (int d : {1, 2}) {
    const Grid g = d == 1 ? build_grid_1d(0.0, 1.0, 32) : build_grid_2d(0.0, 1.0, 10);
    const auto op = assemble_operator(g, EllipticCoefficients::identity());
    for (double t : {1e-4, 1e-2, 0.3}) {
      for (std::size_t x = 0; x < op.size(); x += 3) {
        const auto row = op.kernel_row(t, x);
        double mass = 0.0;
        for (std::size_t y = 0; y < op.size(); ++y) {
          CHECK(op.kernel(t, x, y) == op.kernel(t, y, x));
          CHECK(row[y] >= -1e-10);
          mass += row[y] * g.cell_volume();
        }
        CHECK(mass <= 1.0 + 1e-10);
      }
    }
  }
}

TEST_CASE("kernel_grad_apply: zero field, dense oracle, parity") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const std::vector<double> zero(op.size(), 0.0);
  const auto zero_out = op.grad_apply(0.1, zero);
  for (double v : zero_out[0]) CHECK(v == 0.0);

  // constant field: -e^{tA} D c, with D c nonzero only at the two boundary-adjacent nodes
  const std::vector<double> c(op.size(), 2.0);
  const auto out = op.grad_apply(0.01, c)[0];
  const Eigen::MatrixXd A = dense(op);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::MatrixXd E = es.eigenvectors() * (es.eigenvalues() * 0.01).array().exp().matrix().asDiagonal() *
                            es.eigenvectors().transpose();
  Eigen::VectorXd Dc = Eigen::VectorXd::Zero(op.size());
  const double h = g.spacing(0);
  Dc(0) = 2.0 / (2 * h);
  Dc(op.size() - 1) = -2.0 / (2 * h);
  const Eigen::VectorXd ref = -(E * Dc);
  for (std::size_t i = 0; i < op.size(); ++i) CHECK(std::abs(out[i] - ref(i)) <= 1e-10 * Dc.cwiseAbs().maxCoeff());
  // decays for large t
  double late = 0.0;
  const auto late_out = op.grad_apply(5.0, c);
  for (double v : late_out[0]) late = std::max(late, std::abs(v));
  CHECK(late < 1e-15);

  // even field in, odd field out
  const Grid g8 = build_grid_1d(0.0, 1.0, 8);
  const auto op8 = assemble_operator(g8, EllipticCoefficients::identity());
  std::vector<double> even(op8.size());
  for (std::size_t i = 0; i < even.size(); ++i) even[i] = std::cos(2 * M_PI * g8.interior_position(i)[0]) + 2.0;
  const auto odd = op8.grad_apply(0.02, even)[0];
  for (std::size_t i = 0; i < odd.size(); ++i) CHECK(odd[i] == doctest::Approx(-odd[odd.size() - 1 - i]).epsilon(1e-12));
  CHECK_THROWS_AS(op8.grad_apply(0.0, even), DomainError);
}

TEST_CASE("centered difference is antisymmetric") {
  const Grid g = build_grid_2d(0.0, 1.0, 7);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto a = random_field(op.size(), 11), b = random_field(op.size(), 12);
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> Da(op.size()), Db(op.size());
    op.central_difference(axis, a, Da);
    op.central_difference(axis, b, Db);
    double l = 0.0, r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      l += Da[i] * b[i];
      r += a[i] * Db[i];
    }
    CHECK(l == doctest::Approx(-r).epsilon(1e-12));
  }
}

TEST_CASE("semigroup step applies to columns") {
  const Grid g = build_grid_1d(0.0, 1.0, 12);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  SemigroupStep step(op, 0.02);
  const std::size_t n = op.size(), ld = 5, cols = 3;
  auto M = random_field(n * ld, 4);
  const auto orig = M;
  step.apply_columns(M, ld, cols);
  for (std::size_t j = 0; j < ld; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = orig[i * ld + j];
    const auto expect = j < cols ? op.apply(0.02, col) : col;
    for (std::size_t i = 0; i < n; ++i) CHECK(M[i * ld + j] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("eigen CSV lists index and eigenvalue") {
  const Grid g = build_grid_1d(0.0, 1.0, 4);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  std::ostringstream out;
  write_eigen_csv(op, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,eigenvalue");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
  }
  CHECK(rows == 3);
}

TEST_CASE("kernel estimates: L1 exponent near one, Lp exponents bounded, Gaussian bound") {
  const Grid g = build_grid_1d(0.0, 1.0, 64);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto times = default_time_samples(g);
  const auto r1 = fit_kernel_estimates(op, 1.0, times);
  CHECK(r1.lambda_p == doctest::Approx(1.0).epsilon(0.05));
  CHECK(r1.pass_kernel_decay);
  CHECK(r1.pass_gaussian_bound);
  CHECK(r1.gaussian.size() == 3);
  for (const auto& c : r1.gaussian) {
    CHECK(c.samples == 1000);
    CHECK(c.worst_ratio <= 1.0);
  }
  const auto r2 = fit_kernel_estimates(op, 2.0, times);
  CHECK(r2.lambda_p <= 1.05);
  CHECK(r2.upsilon_p >= 0.0);
  CHECK(r2.epsilon_p >= 0.0);
  CHECK(std::isfinite(r2.K_p));
  CHECK_THROWS_AS(fit_kernel_estimates(op, 0.5, times), DomainError);
  CHECK_THROWS_AS(fit_kernel_estimates(op, 1.0, std::vector<double>{}), DomainError);
}
