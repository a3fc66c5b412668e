#include <doctest.h>

#include <cmath>
#include <cstring>

#include "ldplab/error.hpp"
#include "ldplab/evolvers.hpp"

using namespace ldplab;

namespace {

std::vector<double> sine(const Grid& g, double amp) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point x = g.interior_position(i);
    v[i] = amp * std::sin(M_PI * x[0]) * (g.dim() == 2 ? std::sin(M_PI * x[1]) : 1.0);
  }
  return v;
}

bool bitwise_equal(const SpaceTimeField& a, const SpaceTimeField& b) {
  return a.data().size() == b.data().size() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

double sup_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("default rho exceeds the dimension and grows with nu") {
  CHECK(default_rho(make_preset("burgers")) == 5.0);
  CHECK(default_rho(make_preset("linear_gaussian")) == 3.0);
  PresetOptions o;
  o.d = 2;
  CHECK(default_rho(make_preset("linear_gaussian", o)) == 4.0);
}

TEST_CASE("pure heat flow without noise equals kernel_apply at grid times") {
  const Grid g = build_grid_1d(0.0, 1.0, 32);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  PresetOptions po;
  po.sigma_scale = 0.0;
  const auto c = make_preset("linear_gaussian", po);
  const auto xi = sine(g, 1.0);
  const auto grid = uniform_time_grid(0.5, 16);
  const auto run = integrate_spde(op, c, xi, 0.0, sample_brownian(1, grid, 1), {});
  for (std::size_t m = 0; m <= 16; ++m) {
    CHECK(sup_abs_diff(run.field.at(m), op.apply(grid.times[m], xi)) <= 1e-13);
  }
  CHECK(run.field.rho() == 3.0);
}

TEST_CASE("controlled run with zero control is bitwise the plain run") {
  const Grid g = build_grid_1d(0.0, 1.0, 32);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  for (const char* name : {"burgers", "reaction_diffusion", "linear_gaussian"}) {
    CAPTURE(name);
    const auto c = make_preset(name);
    const auto grid = uniform_time_grid(0.25, 32);
    const auto path = sample_brownian(1, grid, 99, 4);
    const auto plain = integrate_spde(op, c, sine(g, 1.0), 0.05, path);
    const auto ctrl = integrate_controlled(op, c, sine(g, 1.0), 0.05, path, Control::zero(grid, 1));
    CHECK(bitwise_equal(plain.field, ctrl.field));
  }
}

TEST_CASE("noise-free controlled run matches the skeleton") {
  const Grid g = build_grid_1d(0.0, 1.0, 32);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto grid = uniform_time_grid(0.25, 32);
  const double phi0[] = {0.6};
  const auto phi = Control::constant(grid, phi0);
  for (const char* name : {"burgers", "reaction_diffusion", "linear_gaussian"}) {
    CAPTURE(name);
    const auto c = make_preset(name);
    const auto ctrl = integrate_controlled(op, c, sine(g, 1.0), 0.0, sample_brownian(1, grid, 2), phi);
    const auto sk = solve_skeleton(op, c, sine(g, 1.0), phi);
    CHECK(sk.diagnostics.converged);
    CHECK(sup_distance(ctrl.field, sk.field, INFINITY) <= 1e-8);
  }
}

TEST_CASE("linear skeleton matches the spectral Duhamel sum") {
  const Grid g = build_grid_1d(0.0, 1.0, 64);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto c = make_preset("linear_gaussian");
  const std::size_t M = 64;
  const auto grid = uniform_time_grid(0.5, M);
  const double phi0[] = {1.3};
  const auto xi = sine(g, 0.7);
  const auto sk = solve_skeleton(op, c, xi, Control::constant(grid, phi0));
  // psi(t_m) = G_{t_m} xi + sum_{l<m} G_{t_m - t_l} (phi dt 1)
  const std::vector<double> ones(g.size(), 1.0);
  const double dt = 0.5 / M;
  for (std::size_t m : {std::size_t(1), std::size_t(17), M}) {
    auto expect = op.apply(grid.times[m], xi);
    for (std::size_t l = 0; l < m; ++l) {
      const auto s = op.apply(grid.times[m] - grid.times[l], ones);
      for (std::size_t i = 0; i < s.size(); ++i) expect[i] += 1.3 * dt * s[i];
    }
    CHECK(sup_abs_diff(sk.field.at(m), expect) <= 1e-8);
  }
}

TEST_CASE("skeleton fixed point does not depend on the Picard start") {
  const Grid g = build_grid_1d(0.0, 1.0, 32);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto c = make_preset("burgers");
  const auto grid = uniform_time_grid(0.25, 32);
  const double phi0[] = {0.4};
  EvolverOptions zero, heat;
  heat.picard_start = PicardStart::heat;
  const auto a = solve_skeleton(op, c, sine(g, 1.0), Control::constant(grid, phi0), zero);
  const auto b = solve_skeleton(op, c, sine(g, 1.0), Control::constant(grid, phi0), heat);
  CHECK(sup_distance(a.field, b.field, INFINITY) <= 10 * zero.picard_tol);
  CHECK(a.diagnostics.picard_iterations >= 1);
  EvolverOptions few;
  few.picard_max_sweeps = 2;
  CHECK_THROWS_AS(solve_skeleton(op, c, sine(g, 1.0), Control::constant(grid, phi0), few), ConvergenceError);
}

TEST_CASE("mild-form terms add up to the run") {
  const Grid g = build_grid_1d(0.0, 1.0, 32);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto grid = uniform_time_grid(0.25, 32);
  const double phi0[] = {0.5};
  PresetOptions po;
  po.reaction_b = -0.5;
  for (const char* name : {"burgers", "reaction_diffusion"}) {
    CAPTURE(name);
    const auto c = make_preset(name, po);
    const auto xi = sine(g, 1.0);
    const auto dec = decompose_terms(op, c, xi, 0.1, sample_brownian(1, grid, 5), Control::constant(grid, phi0));
    for (std::size_t m = 0; m <= grid.steps(); ++m) {
      CHECK(sup_abs_diff(dec.terms[0].at(m), op.apply(grid.times[m], xi)) <= 1e-12);
      double worst = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        double s = 0.0;
        for (const auto& z : dec.terms) s += z.at(m)[i];
        worst = std::max(worst, std::abs(s - dec.run.field.at(m)[i]));
      }
      CHECK(worst <= 1e-10);
    }
  }
  const auto lin = make_preset("linear_gaussian");
  const auto dec = decompose_terms(op, lin, sine(g, 1.0), 0.1, sample_brownian(1, grid, 5), Control::zero(grid, 1));
  for (int l : {2, 3, 4}) CHECK(dec.terms[l].sup_abs() == 0.0);
  CHECK(dec.terms[1].sup_abs() > 0.0);
}

TEST_CASE("blow-up and step guard failures") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  CustomCoefficients t;
  t.nu = 1.0;
  t.f.pieces = {{0.0, 0.0, 0.0, 4.0}};  // 4 r^3
  t.sigma = {PiecewisePolynomial{{}, {{0.0}}}};
  const auto cubic = make_custom(t);
  const auto grid = uniform_time_grid(1.0, 64);
  try {
    integrate_spde(op, cubic, sine(g, 20.0), 0.0, sample_brownian(1, grid, 1));
    FAIL("expected a blow-up");
  } catch (const BlowUp& e) {
    CHECK(e.time() > 0.0);
    CHECK(e.time() <= 1.0);
  }
  MildStepper stepper(op, cubic, grid);
  std::vector<double> dB(64, 0.0);
  const auto s = run_path(stepper, sine(g, 20.0), 0.0, dB, nullptr, 2.0);
  CHECK(s.blow_up);
  CHECK(std::isinf(s.sup_rho_norm));

  const auto burgers = make_preset("burgers");
  const auto coarse = uniform_time_grid(1.0, 4);  // dt = 0.25 > h = 1/16
  CHECK_THROWS_AS(integrate_spde(op, burgers, sine(g, 1.0), 0.0, sample_brownian(1, coarse, 1)), StepGuardViolation);
  EvolverOptions off;
  off.step_guard = false;
  CHECK_NOTHROW(integrate_spde(op, burgers, sine(g, 1.0), 0.0, sample_brownian(1, coarse, 1), off));
}

TEST_CASE("input mismatches are domain errors") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto c = make_preset("linear_gaussian");
  const auto grid = uniform_time_grid(1.0, 8);
  CHECK_THROWS_AS(integrate_spde(op, c, std::vector<double>(3, 0.0), 0.1, sample_brownian(1, grid, 1)), DomainError);
  CHECK_THROWS_AS(integrate_spde(op, c, sine(g, 1.0), -0.1, sample_brownian(1, grid, 1)), DomainError);
  CHECK_THROWS_AS(integrate_spde(op, c, sine(g, 1.0), 0.1, sample_brownian(2, grid, 1)), DomainError);
  CHECK_THROWS_AS(integrate_controlled(op, c, sine(g, 1.0), 0.1, sample_brownian(1, grid, 1),
                                       Control::zero(uniform_time_grid(1.0, 4), 1)),
                  DomainError);
}

TEST_CASE("run_path agrees with the stored trajectory") {
  const Grid g = build_grid_2d(0.0, 1.0, 8);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  PresetOptions po;
  po.d = 2;
  po.k = 2;
  const auto c = make_preset("reaction_diffusion", po);
  const auto grid = uniform_time_grid(0.2, 16);
  const auto path = sample_brownian(2, grid, 8);
  const auto run = integrate_spde(op, c, sine(g, 1.0), 0.2, path);
  MildStepper stepper(op, c, grid);
  const auto s = run_path(stepper, sine(g, 1.0), 0.2, path.increments, nullptr, run.field.rho());
  CHECK(sup_abs_diff(s.terminal, run.field.terminal()) == 0.0);
  CHECK(s.sup_rho_norm == doctest::Approx(run.field.sup_rho_norm()).epsilon(1e-14));
  const auto d = run_path(stepper, sine(g, 1.0), 0.2, path.increments, nullptr, 3.0, &run.field);
  CHECK(d.sup_rho_norm == 0.0);
}
