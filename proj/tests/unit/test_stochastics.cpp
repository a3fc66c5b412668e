#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ldplab/error.hpp"
#include "ldplab/rng.hpp"
#include "ldplab/stochastics.hpp"

using namespace ldplab;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal streams are reproducible and independent of each other") {
  NormalStream a(5, 9), b(5, 9), c(5, 10), d(6, 9);
  bool differ_c = false, differ_d = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differ_c = differ_c || x != c.normal();
    differ_d = differ_d || x != d.normal();
  }
  CHECK(differ_c);
  CHECK(differ_d);
  NormalStream u(1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(stream_id(3, 7) == ((std::uint64_t{3} << 40) | 7));
}

TEST_CASE("brownian increments: determinism, variance, errors") {
  const auto grid = uniform_time_grid(1.0, 100);
  const auto p1 = sample_brownian(2, grid, 11, 3);
  const auto p2 = sample_brownian(2, grid, 11, 3);
  CHECK(p1.increments == p2.increments);
  std::vector<double> buf(200);
  fill_brownian(2, grid, 11, 3, buf);
  CHECK(buf == p1.increments);
  CHECK_THROWS_AS(sample_brownian(0, grid, 1), DomainError);

  // pooled variance over 1e4 paths of M = 100 steps, dt = 0.01
  double s2 = 0.0;
  const std::size_t paths = 10000;
  for (std::size_t i = 0; i < paths; ++i) {
    fill_brownian(1, grid, 2, i, std::span<double>(buf.data(), 100));
    for (std::size_t m = 0; m < 100; ++m) s2 += buf[m] * buf[m];
  }
  const double var = s2 / (paths * 100.0);
  CHECK(std::abs(var - 0.01) <= 0.01 * 5.0 / std::sqrt(paths * 100.0));

  const auto vals = p1.values();
  CHECK(vals.size() == 101 * 2);
  CHECK(vals[0] == 0.0);
  CHECK(vals[2] == p1.increment(0, 0));
}

TEST_CASE("control L2 norms") {
  const auto g1 = uniform_time_grid(1.0, 8);
  CHECK(control_l2_norm(Control::zero(g1, 1)) == 0.0);
  const double one[] = {1.0};
  CHECK(control_l2_norm(Control::constant(g1, one)) == doctest::Approx(1.0));
  auto c = Control::zero(g1, 2);
  for (std::size_t m = 0; m < 4; ++m) c.values[2 * m] = c.values[2 * m + 1] = 1.0;
  CHECK(control_l2_norm(c) == doctest::Approx(1.0));
  CHECK(control_l2_norm(c.scaled(2.0)) == doctest::Approx(4.0));
  CHECK(control_l2_norm(c.refine(3)) == doctest::Approx(1.0));
  c.bound = 0.9;
  CHECK(!c.within_bound());
  c.bound = 1.1;
  CHECK(c.within_bound());
}

TEST_CASE("Girsanov log weight") {
  const auto g = uniform_time_grid(1.0, 4);
  const auto path = sample_brownian(2, g, 3);
  CHECK(girsanov_log_weight(Control::zero(g, 2), path, 0.3) == 0.0);

  // hand evaluation on M = 4: ΔB totals s_j per dimension, phi = (a, b)
  const double phi[] = {0.7, -1.2};
  const auto c = Control::constant(g, phi);
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    s0 += path.increment(m, 0);
    s1 += path.increment(m, 1);
  }
  const double eps = 0.25;
  const double expect = -(0.7 * s0 - 1.2 * s1) / std::sqrt(eps) - (0.49 + 1.44) / (2 * eps);
  CHECK(girsanov_log_weight(c, path, eps) == doctest::Approx(expect).epsilon(1e-13));
  CHECK_THROWS_AS(girsanov_log_weight(c, path, 0.0), DomainError);
  CHECK_THROWS_AS(girsanov_log_weight(Control::zero(g, 1), path, 0.1), DomainError);
}

TEST_CASE("Girsanov weights have mean one") {
  const auto g = uniform_time_grid(1.0, 16);
  const double phi[] = {0.8};
  const auto c = Control::constant(g, phi);
  const double eps = 1.0;
  const std::size_t n = 100000;
  double s = 0.0, s2 = 0.0;
  std::vector<double> dB(16);
  NoisePath path;
  path.grid = g;
  path.k = 1;
  for (std::size_t i = 0; i < n; ++i) {
    fill_brownian(1, g, 17, i, dB);
    path.increments = dB;
    const double w = std::exp(girsanov_log_weight(c, path, eps));
    s += w;
    s2 += w * w;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("shifted paths") {
  const auto g = uniform_time_grid(1.0, 4);
  auto path = sample_brownian(1, g, 1);
  CHECK(shift_path(path, Control::zero(g, 1), 0.5).increments == path.increments);
  const double one[] = {1.0};
  const auto c = Control::constant(g, one);
  NoisePath zero = path;
  std::fill(zero.increments.begin(), zero.increments.end(), 0.0);
  for (double v : shift_path(zero, c, 1.0).increments) CHECK(v == doctest::Approx(0.25));
  const auto back = shift_path(shift_path(path, c, 0.3), c.scaled(-1.0), 0.3);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(back.increments[i] - path.increments[i]) <= 1e-14);
  CHECK_THROWS_AS(shift_path(path, c, -1.0), DomainError);
}

TEST_CASE("control CSV round trip") {
  const auto g = uniform_time_grid(0.5, 5);
  auto c = Control::zero(g, 2);
  for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] = 0.1 * double(i) - 0.3;
  std::stringstream io;
  write_control_csv(c, io);
  const std::string text = io.str();
  CHECK(text.rfind("t,phi1,phi2\n", 0) == 0);
  const auto back = read_control_csv(io);
  CHECK(back.k == 2);
  CHECK(back.grid.steps() == 5);
  for (std::size_t i = 0; i < c.values.size(); ++i) CHECK(back.values[i] == c.values[i]);
  for (std::size_t m = 0; m <= 5; ++m) CHECK(back.grid.times[m] == doctest::Approx(g.times[m]).epsilon(1e-15));
  std::stringstream bad("t,phi1\n0,1\nx,2\n");
  CHECK_THROWS_AS(read_control_csv(bad), DomainError);
}

TEST_CASE("time grids") {
  CHECK_THROWS_AS(uniform_time_grid(0.0, 4), DomainError);
  CHECK_THROWS_AS(uniform_time_grid(1.0, 0), DomainError);
  CHECK_THROWS_AS(make_time_grid({0.0, 0.5, 0.4}), DomainError);
  CHECK_THROWS_AS(make_time_grid({0.1, 0.5}), DomainError);
  const auto g = make_time_grid({0.0, 0.1, 0.5});
  CHECK(g.steps() == 2);
  CHECK(g.dt(1) == doctest::Approx(0.4));
}
