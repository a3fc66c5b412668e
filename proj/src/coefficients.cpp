#include "ldplab/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ldplab/error.hpp"

namespace ldplab {
namespace {

constexpr double kPi = std::numbers::pi;

ScalarTerm make_term(std::function<double(double, const Point&, double)> value,
                     std::function<double(double, const Point&, double)> dr) {
  ScalarTerm s;
  s.value = std::move(value);
  s.dr = std::move(dr);
  s.zero = false;
  return s;
}

ScalarTerm term_from_table(const PiecewisePolynomial& p) {
  if (p.is_zero()) return ScalarTerm::none();
  return make_term([p](double, const Point&, double r) { return p.value(r); },
                   [p](double, const Point&, double r) { return p.derivative(r); });
}

double normalized(const Point& x, const Point& lo, const Point& hi, int axis) {
  return (x[axis] - lo[axis]) / (hi[axis] - lo[axis]);
}

// Multiplicative noise r / sqrt(1 + eps0 r^2), 1-Lipschitz with linear growth.
std::vector<ScalarTerm> multiplicative_sigma(const PresetOptions& o) {
  std::vector<ScalarTerm> out;
  const double c = o.sigma_scale;
  const double e0 = o.sigma_eps0;
  for (int j = 0; j < o.k; ++j) {
    auto prof = noise_profile(o.noise_profile, static_cast<std::size_t>(j), o.d, o.lo, o.hi);
    out.push_back(make_term(
        [prof, c, e0](double, const Point& x, double r) {
          return c * prof(x) * r / std::sqrt(1.0 + e0 * r * r);
        },
        [prof, c, e0](double, const Point& x, double r) {
          return c * prof(x) * std::pow(1.0 + e0 * r * r, -1.5);
        }));
  }
  return out;
}

std::vector<ScalarTerm> zeros(int n) { return std::vector<ScalarTerm>(static_cast<std::size_t>(n)); }

double cutoff(double n, double r) {
  const double a = std::fabs(r);
  if (a <= n) return 1.0;
  if (a >= n + 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (a - n)));
}

double cutoff_dr(double n, double r) {
  const double a = std::fabs(r);
  if (a <= n || a >= n + 1.0) return 0.0;
  const double s = r < 0.0 ? -1.0 : 1.0;
  return -0.5 * kPi * std::sin(kPi * (a - n)) * s;
}

ScalarTerm truncate_term(const ScalarTerm& t, double n) {
  if (t.zero) return t;
  return make_term(
      [t, n](double s, const Point& x, double r) { return cutoff(n, r) * t.value(s, x, r); },
      [t, n](double s, const Point& x, double r) {
        return cutoff_dr(n, r) * t.value(s, x, r) + cutoff(n, r) * t.dr(s, x, r);
      });
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = n == 1 ? 0.5 * (a + b) : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

}  // namespace

ScalarTerm ScalarTerm::none() { return ScalarTerm{}; }

double PiecewisePolynomial::value(double r) const {
  if (pieces.empty()) return 0.0;
  const auto i = static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), r) - breaks.begin());
  const auto& c = pieces[std::min(i, pieces.size() - 1)];
  double s = 0.0;
  for (std::size_t p = c.size(); p-- > 0;) s = s * r + c[p];
  return s;
}

double PiecewisePolynomial::derivative(double r) const {
  if (pieces.empty()) return 0.0;
  const auto i = static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), r) - breaks.begin());
  const auto& c = pieces[std::min(i, pieces.size() - 1)];
  double s = 0.0;
  for (std::size_t p = c.size(); p-- > 1;) s = s * r + static_cast<double>(p) * c[p];
  return s;
}

bool PiecewisePolynomial::is_zero() const {
  for (const auto& c : pieces) {
    for (double v : c) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

bool CoefficientSet::has_flux() const noexcept {
  for (const auto& t : g1) {
    if (!t.zero) return true;
  }
  for (const auto& t : g2) {
    if (!t.zero) return true;
  }
  return false;
}

bool CoefficientSet::has_noise() const noexcept {
  return std::any_of(sigma.begin(), sigma.end(), [](const ScalarTerm& s) { return !s.zero; });
}

std::function<double(const Point&)> noise_profile(const std::string& name, std::size_t j, int d,
                                                  const Point& lo, const Point& hi) {
  if (d != 1 && d != 2) throw DomainError("noise profile: d must be 1 or 2");
  const double jj = static_cast<double>(j);
  if (name == "constant") return [](const Point&) { return 1.0; };
  if (name == "uniform") {
    if (j == 0) return [](const Point&) { return 1.0; };
    return [=](const Point& x) {
      return std::numbers::sqrt2 * std::cos(kPi * jj * normalized(x, lo, hi, 0));
    };
  }
  if (name == "sine") {
    if (d == 1) {
      return [=](const Point& x) {
        return std::numbers::sqrt2 * std::sin((jj + 1.0) * kPi * normalized(x, lo, hi, 0));
      };
    }
    return [=](const Point& x) {
      return 2.0 * std::sin((jj + 1.0) * kPi * normalized(x, lo, hi, 0)) *
             std::sin(kPi * normalized(x, lo, hi, 1));
    };
  }
  throw DomainError("unknown noise profile '" + name + "' (expected constant, uniform or sine)");
}

double noise_profile_bound(const std::string& name, int k, int d) {
  if (name == "uniform") return 1.0 + 2.0 * (k - 1);
  if (name == "sine") return (d == 1 ? 2.0 : 4.0) * k;
  return static_cast<double>(k);
}

CoefficientSet make_preset(const std::string& name, const PresetOptions& o) {
  if (o.d != 1 && o.d != 2) throw DomainError("preset: d must be 1 or 2");
  if (o.k < 1) throw DomainError("preset: k must be >= 1");
  CoefficientSet c;
  c.name = name;
  c.d = o.d;
  c.k = o.k;
  c.g1 = zeros(o.d);
  c.g2 = zeros(o.d);
  const double prof = noise_profile_bound(o.noise_profile, o.k, o.d);
  const double sig = o.sigma_scale * o.sigma_scale * prof;
  c.parameters = {{"noise_profile", o.noise_profile},
                  {"sigma_scale", o.sigma_scale},
                  {"k", o.k},
                  {"d", o.d}};
  if (name == "burgers") {
    c.sigma = multiplicative_sigma(o);
    for (int i = 0; i < o.d; ++i) {
      c.g2[static_cast<std::size_t>(i)] =
          make_term([](double, const Point&, double r) { return 0.5 * r * r; },
                    [](double, const Point&, double r) { return r; });
    }
    c.nu = 2.0;
    c.K = 0.5;
    c.L = std::max(0.5, sig);
    c.parameters["sigma_eps0"] = o.sigma_eps0;
  } else if (name == "reaction_diffusion") {
    c.sigma = multiplicative_sigma(o);
    const double a = o.reaction_a;
    const double b = o.reaction_b;
    c.f = make_term([a, b](double, const Point&, double r) { return a * r / (1.0 + r * r) + b * r; },
                    [a, b](double, const Point&, double r) {
                      const double q = 1.0 + r * r;
                      return a * (1.0 - r * r) / (q * q) + b;
                    });
    c.nu = 1.0;
    c.K = 1.0;
    c.L = std::max({sig, std::fabs(a) + std::fabs(b), 1e-300});
    c.parameters["sigma_eps0"] = o.sigma_eps0;
    c.parameters["a"] = a;
    c.parameters["b"] = b;
  } else if (name == "linear_gaussian") {
    const double s = o.sigma_scale;
    for (int j = 0; j < o.k; ++j) {
      auto p = noise_profile(o.noise_profile, static_cast<std::size_t>(j), o.d, o.lo, o.hi);
      c.sigma.push_back(make_term([p, s](double, const Point& x, double) { return s * p(x); },
                                  [](double, const Point&, double) { return 0.0; }));
    }
    c.nu = 1.0;
    c.K = 1.0;
    c.L = std::max(1.0, sig);
  } else {
    throw NotFound("unknown coefficient preset '" + name +
                   "' (expected burgers, reaction_diffusion or linear_gaussian)");
  }
  return c;
}

CoefficientSet make_custom(const CustomCoefficients& t) {
  if (t.d != 1 && t.d != 2) throw DomainError("custom coefficients: d must be 1 or 2");
  if (t.k < 1) throw DomainError("custom coefficients: k must be >= 1");
  if (!(t.nu >= 1.0) || !(t.K > 0.0) || !(t.L > 0.0)) {
    throw DomainError("custom coefficients: need nu >= 1, K > 0, L > 0");
  }
  auto check_table = [](const PiecewisePolynomial& p, const std::string& what) {
    if (p.pieces.empty()) return;
    if (p.pieces.size() != p.breaks.size() + 1) {
      throw DomainError(what + ": needs one more piece than breakpoints");
    }
    if (!std::is_sorted(p.breaks.begin(), p.breaks.end())) {
      throw DomainError(what + ": breakpoints must increase");
    }
  };
  CoefficientSet c;
  c.name = "custom";
  c.d = t.d;
  c.k = t.k;
  c.nu = t.nu;
  c.K = t.K;
  c.L = t.L;
  check_table(t.f, "f");
  c.f = term_from_table(t.f);
  c.g1 = zeros(t.d);
  c.g2 = zeros(t.d);
  if (t.g1.size() > static_cast<std::size_t>(t.d) || t.g2.size() > static_cast<std::size_t>(t.d)) {
    throw DomainError("custom coefficients: more g entries than dimensions");
  }
  for (std::size_t i = 0; i < t.g1.size(); ++i) {
    check_table(t.g1[i], "g1");
    c.g1[i] = term_from_table(t.g1[i]);
  }
  for (std::size_t i = 0; i < t.g2.size(); ++i) {
    check_table(t.g2[i], "g2");
    c.g2[i] = term_from_table(t.g2[i]);
  }
  if (t.sigma.size() != static_cast<std::size_t>(t.k)) {
    throw DomainError("custom coefficients: sigma needs exactly k entries");
  }
  for (std::size_t j = 0; j < t.sigma.size(); ++j) {
    check_table(t.sigma[j], "sigma");
    if (t.sigma[j].is_zero()) {
      c.sigma.push_back(ScalarTerm::none());
      continue;
    }
    auto prof = noise_profile(t.noise_profile, j, t.d, t.lo, t.hi);
    const auto p = t.sigma[j];
    c.sigma.push_back(make_term([p, prof](double, const Point& x, double r) { return prof(x) * p.value(r); },
                                [p, prof](double, const Point& x, double r) {
                                  return prof(x) * p.derivative(r);
                                }));
  }
  c.parameters = {{"noise_profile", t.noise_profile}, {"k", t.k}, {"d", t.d}};
  return c;
}

CoefficientSet truncate(const CoefficientSet& c, double n) {
  if (!(n > 0.0)) throw DomainError("truncation level must be positive");
  CoefficientSet out = c;
  out.truncation = n;
  out.f = truncate_term(c.f, n);
  for (auto& t : out.g1) t = truncate_term(t, n);
  for (auto& t : out.g2) t = truncate_term(t, n);
  for (auto& t : out.sigma) t = truncate_term(t, n);
  return out;
}

double evaluate(const CoefficientSet& c, Term which, std::size_t index, double t, const Point& x,
                double r) {
  auto need = [&](std::size_t count, const char* what) {
    if (index >= count) {
      throw DomainError(std::string("evaluate: index ") + std::to_string(index) +
                        " out of range for " + what + " (size " + std::to_string(count) + ")");
    }
  };
  switch (which) {
    case Term::f:
      need(1, "f");
      return c.f(t, x, r);
    case Term::g:
      need(c.g1.size(), "g");
      return c.g1[index](t, x, r) + c.g2[index](t, x, r);
    case Term::g1:
      need(c.g1.size(), "g1");
      return c.g1[index](t, x, r);
    case Term::g2:
      need(c.g2.size(), "g2");
      return c.g2[index](t, x, r);
    case Term::sigma:
      need(c.sigma.size(), "sigma");
      return c.sigma[index](t, x, r);
  }
  throw DomainError("evaluate: unknown term");
}

bool ValidationReport::pass() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.pass; });
}

const AssumptionCheck& ValidationReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw NotFound("no assumption check named '" + name + "'");
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["pass"] = pass();
  j["effective_nu"] = std::isfinite(effective_nu) ? nlohmann::json(effective_nu) : nlohmann::json("inf");
  j["validated_nu"] = std::isfinite(validated_nu) ? nlohmann::json(validated_nu) : nlohmann::json("inf");
  auto& arr = j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"pass", c.pass},
                   {"worst_ratio", c.worst_ratio},
                   {"witness",
                    {{"t", c.witness[0]}, {"x", {c.witness[1], c.witness[2]}}, {"r", c.witness[3]},
                     {"s", c.witness[4]}}}});
  }
  return j;
}

ValidationReport validate_assumptions(const CoefficientSet& c, const Grid& grid, double T,
                                      const SampleSpec& spec) {
  if (!(spec.r_max > spec.r_min) || spec.r_count < 2 || spec.t_count < 1 || spec.x_count < 1) {
    throw DomainError("validate_assumptions: degenerate sample ranges");
  }
  if (!(T >= 0.0)) throw DomainError("validate_assumptions: T must be >= 0");
  const int d = grid.dim();
  if (d != c.d) throw DomainError("validate_assumptions: grid and coefficient dimensions differ");

  std::vector<double> rs = linspace(spec.r_min, spec.r_max, spec.r_count);
  for (double extra : {0.0, 1e-3, -1e-3}) {
    if (extra >= spec.r_min && extra <= spec.r_max) rs.push_back(extra);
  }
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  const auto ts = linspace(0.0, T, spec.t_count);
  std::vector<Point> xs;
  for (std::size_t i = 0; i < spec.x_count; ++i) {
    const double s = (static_cast<double>(i) + 1.0) / (static_cast<double>(spec.x_count) + 1.0);
    if (d == 1) {
      xs.push_back({grid.lo(0) + s * (grid.hi(0) - grid.lo(0)), 0.0});
      continue;
    }
    for (std::size_t k = 0; k < spec.x_count; ++k) {
      const double s2 = (static_cast<double>(k) + 1.0) / (static_cast<double>(spec.x_count) + 1.0);
      xs.push_back({grid.lo(0) + s * (grid.hi(0) - grid.lo(0)), grid.lo(1) + s2 * (grid.hi(1) - grid.lo(1))});
    }
  }

  enum { g1_growth, g2_growth, sigma_growth, f_growth, sigma_lip, f_lip, g_lip, count };
  ValidationReport rep;
  const char* names[count] = {"g1_growth",       "g2_growth",   "sigma_growth", "f_growth",
                              "sigma_lipschitz", "f_lipschitz", "g_lipschitz"};
  rep.checks.resize(count);
  for (int i = 0; i < count; ++i) rep.checks[static_cast<std::size_t>(i)].name = names[i];
  auto record = [&](int which, double ratio, double t, const Point& x, double r, double s) {
    auto& ch = rep.checks[static_cast<std::size_t>(which)];
    if (std::isnan(ratio)) ratio = std::numeric_limits<double>::infinity();
    if (ratio > ch.worst_ratio) {
      ch.worst_ratio = ratio;
      ch.witness = {t, x[0], x[1], r, s};
    }
  };

  const std::size_t nr = rs.size();
  const std::size_t nd = static_cast<std::size_t>(d);
  const std::size_t nk = c.sigma.size();
  // Worst g2 value per r and worst g difference quotient per (r, s), kept for the nu search.
  std::vector<double> g_growth_max(nr, 0.0);
  std::vector<double> g_lip_max(nr * nr, 0.0);
  std::vector<double> fv(nr), sv(nr * nk), gv(nr * nd), g2v(nr * nd);
  for (double t : ts) {
    for (const Point& x : xs) {
      for (std::size_t a = 0; a < nr; ++a) {
        const double r = rs[a];
        fv[a] = c.f(t, x, r);
        double ssum = 0.0;
        for (std::size_t j = 0; j < nk; ++j) {
          sv[a * nk + j] = c.sigma[j](t, x, r);
          ssum += sv[a * nk + j] * sv[a * nk + j];
        }
        for (std::size_t i = 0; i < nd; ++i) {
          const double v1 = c.g1[i](t, x, r);
          const double v2 = c.g2[i](t, x, r);
          g2v[a * nd + i] = v2;
          gv[a * nd + i] = v1 + v2;
          record(g1_growth, std::fabs(v1) / (c.K * (1.0 + std::fabs(r))), t, x, r, r);
          record(g2_growth, std::fabs(v2) / (c.K * (1.0 + std::pow(std::fabs(r), c.nu))), t, x, r, r);
          g_growth_max[a] = std::max(g_growth_max[a], std::fabs(v2));
        }
        record(sigma_growth, ssum / (c.L * (r * r + 1.0)), t, x, r, r);
        record(f_growth, std::fabs(fv[a]) / (c.L * (std::fabs(r) + 1.0)), t, x, r, r);
      }
      for (std::size_t a = 0; a < nr; ++a) {
        for (std::size_t b = a + 1; b < nr; ++b) {
          const double r = rs[a];
          const double s = rs[b];
          const double dist = std::fabs(r - s);
          double sdiff = 0.0;
          for (std::size_t j = 0; j < nk; ++j) {
            const double dv = sv[a * nk + j] - sv[b * nk + j];
            sdiff += dv * dv;
          }
          record(sigma_lip, sdiff / (c.L * dist * dist), t, x, r, s);
          record(f_lip, std::fabs(fv[a] - fv[b]) / (c.L * dist), t, x, r, s);
          for (std::size_t i = 0; i < nd; ++i) {
            const double lhs = std::fabs(gv[a * nd + i] - gv[b * nd + i]);
            const double w = 1.0 + std::pow(std::fabs(r), c.nu - 1.0) + std::pow(std::fabs(s), c.nu - 1.0);
            record(g_lip, lhs / (c.L * w * dist), t, x, r, s);
            g_lip_max[a * nr + b] = std::max(g_lip_max[a * nr + b], lhs / dist);
          }
        }
      }
    }
  }
  for (auto& ch : rep.checks) ch.pass = ch.worst_ratio <= 1.0 + 1e-12;

  // Smallest nu satisfying both bounds on g with the declared K and L.
  auto holds = [&](double nu) {
    for (std::size_t a = 0; a < nr; ++a) {
      if (g_growth_max[a] > c.K * (1.0 + std::pow(std::fabs(rs[a]), nu)) * (1.0 + 1e-12)) return false;
      for (std::size_t b = a + 1; b < nr; ++b) {
        const double w = 1.0 + std::pow(std::fabs(rs[a]), nu - 1.0) + std::pow(std::fabs(rs[b]), nu - 1.0);
        if (g_lip_max[a * nr + b] > c.L * w * (1.0 + 1e-12)) return false;
      }
    }
    return true;
  };
  constexpr double nu_max = 8.0;
  if (holds(1.0)) {
    rep.effective_nu = 1.0;
    rep.validated_nu = 1.0;
  } else if (!holds(nu_max)) {
    rep.effective_nu = std::numeric_limits<double>::infinity();
    rep.validated_nu = std::numeric_limits<double>::infinity();
  } else {
    double lo = 1.0, hi = nu_max;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (holds(mid) ? hi : lo) = mid;
    }
    rep.effective_nu = hi;
    rep.validated_nu = nu_max;
    for (double nu = 1.0; nu <= nu_max; nu += 0.5) {
      if (holds(nu)) {
        rep.validated_nu = nu;
        break;
      }
    }
  }
  return rep;
}

nlohmann::json to_json(const CoefficientSet& c) {
  return {{"name", c.name}, {"d", c.d},         {"k", c.k},
          {"nu", c.nu},     {"K", c.K},         {"L", c.L},
          {"truncation", c.truncation}, {"parameters", c.parameters}};
}

}  // namespace ldplab
