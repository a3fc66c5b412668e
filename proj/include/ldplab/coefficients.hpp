#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldplab/grid.hpp"

namespace ldplab {

// One scalar nonlinearity c(t, x, r) with its r-derivative.
struct ScalarTerm {
  std::function<double(double, const Point&, double)> value;
  std::function<double(double, const Point&, double)> dr;
  bool zero = true;  // identically zero; lets the evolvers skip the term

  static ScalarTerm none();
  double operator()(double t, const Point& x, double r) const { return zero ? 0.0 : value(t, x, r); }
  double derivative(double t, const Point& x, double r) const { return zero ? 0.0 : dr(t, x, r); }
};

// Piecewise polynomial in r. `breaks` are the interior breakpoints in increasing
// order; piece i covers [breaks[i-1], breaks[i]) and stores coefficients of
// 1, r, r^2, ... (global powers of r, not shifted to the piece).
struct PiecewisePolynomial {
  std::vector<double> breaks;
  std::vector<std::vector<double>> pieces;

  double value(double r) const;
  double derivative(double r) const;
  bool is_zero() const;
};

// Coefficient table read from a config file; every term depends on r only,
// except sigma_j which is multiplied by the noise profile of j.
struct CustomCoefficients {
  int d = 1;
  int k = 1;
  double nu = 1.0;
  double K = 1.0;
  double L = 1.0;
  PiecewisePolynomial f;
  std::vector<PiecewisePolynomial> g1;     // d entries (may be empty: zero)
  std::vector<PiecewisePolynomial> g2;     // d entries (may be empty: zero)
  std::vector<PiecewisePolynomial> sigma;  // k entries
  std::string noise_profile = "constant";  // constant, uniform or sine
  Point lo{0.0, 0.0};                       // box used to normalize x in the profile
  Point hi{1.0, 1.0};
};

enum class Term { f, g, g1, g2, sigma };

// f, g_i = g_i1 + g_i2 and sigma_j together with the declared constants.
struct CoefficientSet {
  std::string name;
  int d = 1;
  int k = 1;
  double nu = 1.0;
  double K = 1.0;
  double L = 1.0;
  ScalarTerm f;
  std::vector<ScalarTerm> g1;     // d entries; may depend on x
  std::vector<ScalarTerm> g2;     // d entries; x is ignored
  std::vector<ScalarTerm> sigma;  // k entries
  double truncation = 0.0;        // > 0: smooth cutoff of every term on |r| in [n, n+1]
  nlohmann::json parameters;

  bool has_flux() const noexcept;
  bool has_drift() const noexcept { return !f.zero; }
  bool has_noise() const noexcept;
};

struct PresetOptions {
  int d = 1;
  int k = 1;
  std::string noise_profile = "uniform";  // uniform: 1, sqrt2 cos(pi (j-1) x); sine: sqrt2 sin(j pi x)
  double sigma_scale = 1.0;               // c in sigma_j = c prof_j(x) r / sqrt(1 + eps0 r^2)
  double sigma_eps0 = 1.0;
  double reaction_a = 1.0;  // f = a r / (1 + r^2) + b r
  double reaction_b = -1.0;
  Point lo{0.0, 0.0};  // box used to normalize x in the noise profile
  Point hi{1.0, 1.0};
};

// burgers, reaction_diffusion or linear_gaussian. Throws NotFound otherwise.
CoefficientSet make_preset(const std::string& name, const PresetOptions& options = {});
CoefficientSet make_custom(const CustomCoefficients& table);
// Profile j (0-based) on the box [lo, hi]. Throws DomainError for an unknown name.
std::function<double(const Point&)> noise_profile(const std::string& name, std::size_t j, int d,
                                                  const Point& lo, const Point& hi);
// Upper bound of sum_j prof_j(x)^2 over the box.
double noise_profile_bound(const std::string& name, int k, int d);
// Copy whose terms are multiplied by chi_n(|r|), chi = 1 on [0,n], 0 past n+1, cosine ramp between.
CoefficientSet truncate(const CoefficientSet& c, double n);

// Pointwise evaluation. `index` is 0 for f, the axis for g/g1/g2 and j for sigma.
// Throws DomainError for an out-of-range index.
double evaluate(const CoefficientSet& c, Term which, std::size_t index, double t, const Point& x,
                double r);

struct SampleSpec {
  double r_min = -10.0;
  double r_max = 10.0;
  std::size_t r_count = 41;
  std::size_t t_count = 5;
  std::size_t x_count = 9;  // per axis, evenly spaced inside the grid box
};

struct AssumptionCheck {
  std::string name;  // g1_growth, g2_growth, sigma_growth, f_growth, *_lipschitz
  bool pass = true;
  double worst_ratio = 0.0;  // max of lhs / rhs over the sample
  std::array<double, 5> witness{};  // t, x0, x1, r, s
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  // Smallest nu for which the growth and Lipschitz bounds on g hold with the declared K, L:
  // by bisection, and on the ladder 1, 1.5, 2, ... (infinity when none up to 8 works).
  double effective_nu = 1.0;
  double validated_nu = 1.0;
  bool pass() const noexcept;
  const AssumptionCheck& check(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Throws DomainError for degenerate sample ranges.
ValidationReport validate_assumptions(const CoefficientSet& c, const Grid& grid, double T,
                                      const SampleSpec& spec = {});

nlohmann::json to_json(const CoefficientSet& c);

}  // namespace ldplab
