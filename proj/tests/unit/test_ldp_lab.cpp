#include <doctest.h>

#include <cmath>
#include <limits>

#include "ldplab/error.hpp"
#include "ldplab/ldp_lab.hpp"

using namespace ldplab;

namespace {

struct Setup {
  Grid grid = build_grid_1d(0.0, 1.0, 16);
  KernelOperator op = assemble_operator(grid, EllipticCoefficients::identity());
  TimeGrid times = uniform_time_grid(0.25, 16);
  std::vector<double> xi = std::vector<double>(grid.size(), 0.0);
};

MonteCarloOptions mc(std::size_t n, int workers = 1) {
  MonteCarloOptions o;
  o.n = n;
  o.seed = 21;
  o.workers = workers;
  return o;
}

ProbabilityEstimate synthetic(double eps, double p) {
  ProbabilityEstimate e;
  e.eps = eps;
  e.p_hat = p;
  e.n = 1000;
  return e;
}

}  // namespace

TEST_CASE("sure and impossible events") {
  Setup s;
  const auto c = make_preset("linear_gaussian");
  const auto sure = estimate_event(s.op, c, s.xi, 0.1, TargetSpec::mean_exceedance(s.grid, -1e300), s.times,
                                   EstimatorMethod::plain, nullptr, mc(200));
  CHECK(sure.p_hat == 1.0);
  CHECK(sure.std_error == 0.0);
  CHECK(sure.ess == doctest::Approx(200.0));
  const auto never = estimate_event(s.op, c, s.xi, 0.1, TargetSpec::mean_exceedance(s.grid, 1e300), s.times,
                                    EstimatorMethod::plain, nullptr, mc(200));
  CHECK(never.p_hat == 0.0);
  CHECK_THROWS_AS(estimate_event(s.op, c, s.xi, 0.1, TargetSpec::mean_exceedance(s.grid, 0.0), s.times,
                                 EstimatorMethod::plain, nullptr, mc(50)),
                  DomainError);
  CHECK_THROWS_AS(estimate_event(s.op, c, s.xi, 0.1, TargetSpec::mean_exceedance(s.grid, 0.0), s.times,
                                 EstimatorMethod::importance, nullptr, mc(200)),
                  DomainError);
}

TEST_CASE("estimates do not depend on the worker count") {
  Setup s;
  const auto c = make_preset("burgers");
  const auto ev = TargetSpec::point_exceedance(s.grid, {0.5, 0.0}, 0.1);
  const double phi0[] = {0.5};
  const auto bias = Control::constant(s.times, phi0);
  const auto a = estimate_event(s.op, c, std::vector<double>(s.grid.size(), 0.2), 0.3, ev, s.times,
                                EstimatorMethod::importance, &bias, mc(300, 1));
  const auto b = estimate_event(s.op, c, std::vector<double>(s.grid.size(), 0.2), 0.3, ev, s.times,
                                EstimatorMethod::importance, &bias, mc(300, 4));
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.std_error == b.std_error);
  CHECK(a.ess == b.ess);
}

TEST_CASE("point exceedance of the linear model against the Gaussian tail") {
  Setup s;
  const auto c = make_preset("linear_gaussian");
  const double eps = 0.2, a = 0.2;
  const std::size_t x0 = s.grid.nearest_interior({0.5, 0.0});
  // u(T, x0) ~ N(0, eps * sum_m dt (G_{T - t_m} 1)(x0)^2)
  double var = 0.0;
  const std::vector<double> ones(s.grid.size(), 1.0);
  for (std::size_t m = 0; m < s.times.steps(); ++m) {
    const double v = s.op.apply(s.times.horizon() - s.times.times[m], ones)[x0];
    var += s.times.dt(m) * v * v;
  }
  var *= eps;
  const double oracle = 0.5 * std::erfc(a / std::sqrt(2.0 * var));
  for (auto method : {EstimatorMethod::plain, EstimatorMethod::importance}) {
    const auto ev = TargetSpec::point_exceedance(s.grid, {0.5, 0.0}, a);
    Control bias = Control::zero(s.times, 1);
    if (method == EstimatorMethod::importance) {
      bias = minimize_action(s.op, c, s.xi, ev, s.times).beta;
    }
    const auto est = estimate_event(s.op, c, s.xi, eps, ev, s.times, method, &bias, mc(20000, 4));
    CHECK(std::abs(est.p_hat - oracle) <= 3.0 * est.std_error);
    if (method == EstimatorMethod::plain) {
      CHECK(est.ess == doctest::Approx(20000.0));
    } else {
      // ESS counts the weights of hits only
      CHECK(est.ess <= static_cast<double>(est.hits) + 1e-9);
      CHECK(est.ess > 0.1 * static_cast<double>(est.hits));
    }
  }
}

TEST_CASE("rate fit on synthetic probabilities") {
  std::vector<ProbabilityEstimate> e;
  for (double eps : {0.4, 0.2, 0.1}) e.push_back(synthetic(eps, std::exp(-2.0 / eps)));
  auto fit = fit_rate(e);
  CHECK(fit.rate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(fit.slope) < 1e-12);
  e.clear();
  for (double eps : {0.4, 0.2, 0.1}) e.push_back(synthetic(eps, 0.5 * std::exp(-2.0 / eps)));
  fit = fit_rate(e);
  CHECK(fit.rate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.slope == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
  for (double r : fit.residuals) CHECK(std::abs(r) < 1e-12);

  e.push_back(synthetic(0.05, 0.0));
  try {
    fit_rate(e);
    FAIL("expected insufficient data");
  } catch (const InsufficientData& err) {
    CHECK(err.eps() == 0.05);
  }
  std::vector<ProbabilityEstimate> two{synthetic(0.4, 0.1), synthetic(0.2, 0.01), synthetic(0.2, 0.01)};
  CHECK_THROWS_AS(fit_rate(two), InsufficientData);
}

TEST_CASE("convergence experiment: zero row and deterministic gamma") {
  Setup s;
  const auto c = make_preset("linear_gaussian");
  ConvergenceFamily fam;
  fam.xi = std::vector<double>(s.grid.size(), 0.5);
  fam.eta = std::vector<double>(s.grid.size(), 1.0);
  const double p0[] = {0.3};
  fam.phi = Control::constant(s.times, p0);
  const double eps[] = {0.4, 0.2, 0.1, 0.0};
  const auto t = convergence_experiment(s.op, c, fam, eps, s.times, 3.0, mc(200));
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[3].mean_distance <= 1e-9);
  CHECK(t.rows[3].n == 1);
  CHECK(t.strictly_decreasing);

  fam.gamma = NoiseScaling::zero;
  fam.chi = std::make_shared<Control>(Control::constant(s.times, p0));
  const auto z = convergence_experiment(s.op, c, fam, eps, s.times, 3.0, mc(200));
  for (const auto& r : z.rows) CHECK(r.n == 1);
  // a deterministic perturbation of order eps gives slope one
  CHECK(z.slope == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("tightness table is monotone in C") {
  Setup s;
  const auto c = make_preset("burgers");
  const std::vector<double> xi(s.grid.size(), 0.5);
  const double eps[] = {0.2, 0.05};
  const double C[] = {0.01, 0.5, 1.0, 2.0};
  const auto t = tightness_probe(s.op, c, xi, eps, C, s.times, 5.0, nullptr, mc(1000, 2));
  CHECK(t.nonincreasing());
  // below the skeleton's norm every path exceeds
  CHECK(t.sup_over_eps[0] == 1.0);
  for (const auto& row : t.exceedance) {
    for (std::size_t j = 1; j < row.size(); ++j) CHECK(row[j] <= row[j - 1]);
  }
  CHECK_THROWS_AS(tightness_probe(s.op, c, xi, eps, C, s.times, 5.0, nullptr, mc(999)), DomainError);
}
