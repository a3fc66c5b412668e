#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "ldplab/action.hpp"
#include "ldplab/error.hpp"

using namespace ldplab;

namespace {

std::vector<double> sine(const Grid& g, double amp) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = amp * std::sin(M_PI * g.interior_position(i)[0]);
  return v;
}

}  // namespace

TEST_CASE("action of simple controls") {
  const auto g = uniform_time_grid(1.0, 10);
  CHECK(action_of(Control::zero(g, 2)) == 0.0);
  const double one[] = {1.0};
  const auto c = Control::constant(g, one);
  CHECK(action_of(c) == doctest::Approx(0.5));
  CHECK(action_of(c.scaled(2.0)) == doctest::Approx(4.0 * action_of(c)));
}

TEST_CASE("the uncontrolled terminal field costs nothing") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto grid = uniform_time_grid(0.25, 16);
  for (const char* name : {"linear_gaussian", "burgers"}) {
    CAPTURE(name);
    const auto c = make_preset(name);
    const auto free = solve_skeleton(op, c, sine(g, 1.0), Control::zero(grid, 1)).field;
    const auto t = free.terminal();
    const auto v = minimize_action(op, c, sine(g, 1.0), TargetSpec::terminal({t.begin(), t.end()}), grid);
    CHECK(v.feasible);
    CHECK(v.value < 1e-10);
    for (double b : v.beta.values) CHECK(std::abs(b) < 1e-6);
  }
}

TEST_CASE("linear model: minimizer matches the least-squares oracle") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto grid = uniform_time_grid(0.5, 16);
  const auto c = make_preset("linear_gaussian");
  const auto xi = sine(g, 0.5);
  const std::size_t N = g.size(), M = grid.steps();
  // columns of the control-to-terminal map from unit impulses
  const auto free = solve_skeleton(op, c, xi, Control::zero(grid, 1)).field;
  const std::vector<double> zero(N, 0.0);
  Eigen::MatrixXd S(N, M);
  for (std::size_t m = 0; m < M; ++m) {
    auto e = Control::zero(grid, 1);
    e.values[m] = 1.0;
    const auto col = solve_skeleton(op, c, zero, e).field.terminal();
    for (std::size_t i = 0; i < N; ++i) S(i, m) = col[i];
  }
  const double dt = grid.dt(0);
  // reachable target: free + S S^T v / dt with v smooth
  Eigen::VectorXd v(N);
  for (std::size_t i = 0; i < N; ++i) v(i) = std::sin(M_PI * g.interior_position(i)[0]) + 0.3 * std::sin(2 * M_PI * g.interior_position(i)[0]);
  const Eigen::VectorXd z = S * S.transpose() * v / dt;
  std::vector<double> y(N);
  for (std::size_t i = 0; i < N; ++i) y[i] = free.terminal()[i] + z(i);
  // oracle: beta = (1/dt) S^T (S S^T / dt)^+ z; the minimum-norm preimage is S^T v / dt
  const Eigen::VectorXd beta_star = S.transpose() * v / dt;
  const double oracle = 0.5 * dt * beta_star.squaredNorm();

  const auto res = minimize_action(op, c, xi, TargetSpec::terminal(y), grid);
  CHECK(res.feasible);
  CHECK(res.value == doctest::Approx(oracle).epsilon(1e-3));
  for (std::size_t m = 0; m < M; ++m) CHECK(res.beta.values[m] == doctest::Approx(beta_star(m)).epsilon(1e-2).scale(1e-3));
  CHECK(res.psi.nodes() == N);
}

TEST_CASE("no noise coefficient: targets off the free path are unreachable") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto grid = uniform_time_grid(0.25, 8);
  PresetOptions po;
  po.sigma_scale = 0.0;
  const auto c = make_preset("linear_gaussian", po);
  const auto v = minimize_action(op, c, sine(g, 1.0), TargetSpec::terminal(sine(g, 2.0)), grid);
  CHECK(!v.feasible);
  CHECK(std::isinf(v.value));
}

TEST_CASE("sensitivity gradient matches central differences") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto grid = uniform_time_grid(0.25, 32);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  PresetOptions po;
  po.k = 2;
  for (const char* name : {"burgers", "reaction_diffusion", "linear_gaussian"}) {
    for (int kind = 0; kind < 3; ++kind) {
      CAPTURE(name);
      CAPTURE(kind);
      const auto c = make_preset(name, po);
      TargetSpec t = kind == 0   ? TargetSpec::terminal(sine(g, 0.3))
                     : kind == 1 ? TargetSpec::point_exceedance(g, {0.5, 0.0}, 2.0)
                                 : TargetSpec::ball_exit(3.0, 5.0);
      PenalizedObjective obj(op, c, sine(g, 1.0), prepare_target(t, op, c, sine(g, 1.0), grid), grid);
      obj.set_penalty(100.0);
      std::vector<double> beta(obj.parameters());
      for (auto& b : beta) b = 0.5 * n01(rng);
      std::vector<double> grad(beta.size());
      obj.value_and_gradient(beta, grad);
      std::vector<std::size_t> idx;
      std::uniform_int_distribution<std::size_t> pick(0, beta.size() - 1);
      for (int i = 0; i < 16; ++i) idx.push_back(pick(rng));
      const auto fd = obj.finite_difference_gradient(beta, idx, 1e-4);
      double gmax = 0.0;
      for (double v : grad) gmax = std::max(gmax, std::abs(v));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(std::abs(grad[idx[i]] - fd[i]) <= 1e-5 * std::max(std::abs(fd[i]), 1e-3 * gmax));
      }
    }
  }
}

TEST_CASE("event margins") {
  const Grid g = build_grid_1d(0.0, 1.0, 4);
  const auto t = TargetSpec::point_exceedance(g, {0.5, 0.0}, 1.0);
  CHECK(event_margin(t, g, std::vector<double>{0.0, 1.5, 0.0}, 0.0) == doctest::Approx(0.5));
  const auto m = TargetSpec::mean_exceedance(g, 0.5);
  CHECK(event_margin(m, g, std::vector<double>{1.0, 1.0, 1.0}, 0.0) == doctest::Approx(0.25));
  const auto b = TargetSpec::ball_exit(1.0, 2.0);
  CHECK(event_margin(b, g, std::vector<double>{2.0, 0.0, 0.0}, 0.0) == doctest::Approx(0.0));
  CHECK(event_margin(TargetSpec::tube_exit(0.2, 3.0), g, std::vector<double>(3), 0.5) == doctest::Approx(0.3));
  CHECK_THROWS_AS(event_margin(TargetSpec::terminal({0, 0, 0}), g, std::vector<double>(3), 0.0), DomainError);
}

TEST_CASE("lower semicontinuity probe") {
  const Grid g = build_grid_1d(0.0, 1.0, 16);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto grid = uniform_time_grid(0.25, 8);
  const auto c = make_preset("linear_gaussian");
  const double phi0[] = {1.0};
  const auto psi = solve_skeleton(op, c, sine(g, 1.0), Control::constant(grid, phi0)).field;
  const auto same = lsc_probe(op, c, {sine(g, 1.0), sine(g, 1.0), sine(g, 1.0)}, psi);
  CHECK(same[0] == doctest::Approx(same[1]).epsilon(1e-6));
  CHECK(same[1] == doctest::Approx(same[2]).epsilon(1e-6));
  // the generating control is feasible, so the minimum cannot exceed its action
  CHECK(same[0] <= 0.5 * 0.25 + 1e-6);
  CHECK(same[0] > 0.0);
  // constant perturbations are absorbed by the first control step, so values converge to the limit
  std::vector<std::vector<double>> seq;
  for (int n : {2, 4, 8, 16, 64}) {
    auto x = sine(g, 1.0);
    for (double& v : x) v += 1.0 / n;
    seq.push_back(x);
  }
  const auto vals = lsc_probe(op, c, seq, psi);
  for (double v : vals) CHECK(std::isfinite(v));
  CHECK(std::abs(vals.back() - same[0]) < std::abs(vals.front() - same[0]));
  CHECK(vals.back() == doctest::Approx(same[0]).epsilon(0.1));
  // without noise every target off the free path is unreachable
  PresetOptions po;
  po.sigma_scale = 0.0;
  const auto none = lsc_probe(op, make_preset("linear_gaussian", po), seq, psi);
  for (double v : none) CHECK(std::isinf(v));
}
