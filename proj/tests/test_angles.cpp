#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "pilotsync/angles.hpp"

using namespace pilotsync;

namespace {

// Nearest grid multiple by exhaustive search, ties toward +inf.
double brute_grid(double x, int M) {
  const double step = two_pi / M;
  const auto center = static_cast<long long>(std::floor(x / step));
  double best = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (long long k = center - 2; k <= center + 2; ++k) {
    const double dist = std::abs(x - k * step);
    if (dist < best_dist - 1e-15 || (std::abs(dist - best_dist) <= 1e-15 && k * step > best)) {
      best = k * step;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("wrap_pi on known points") {
  CHECK(wrap_pi(0.0) == 0.0);
  CHECK(wrap_pi(-0.99 * pi - 0.99 * pi) == doctest::Approx(0.02 * pi).epsilon(1e-12));
  CHECK(wrap_pi(pi) == doctest::Approx(-pi));
  CHECK(wrap_pi(-pi) == doctest::Approx(-pi));
  CHECK(wrap_pi(3.0 * two_pi + 0.25) == doctest::Approx(0.25));
}

TEST_CASE("wrap_frac and round_to_grid on known points") {
  CHECK(wrap_frac(0.0, 4) == 0.0);
  CHECK(wrap_frac(pi / 4, 4) == doctest::Approx(-pi / 4));
  CHECK(wrap_frac(2 * pi / 3, 2) == doctest::Approx(-pi / 3));
  CHECK(round_to_grid(0.0, 8) == 0.0);
  CHECK(round_to_grid(pi / 4, 4) == doctest::Approx(pi / 2));
  CHECK(round_to_grid(-0.1, 2) == 0.0);
  CHECK(grid_index(pi / 4, 4) == 1);
  CHECK(grid_index(-3 * pi / 4 - 0.01, 4) == -2);
}

TEST_CASE("round_to_grid matches exhaustive nearest-multiple search") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-20.0, 20.0);
  for (int M : {2, 3, 4, 8, 16}) {
    for (int n = 0; n < 2000; ++n) {
      const double x = U(rng);
      CHECK(round_to_grid(x, M) == doctest::Approx(brute_grid(x, M)).epsilon(1e-13));
    }
  }
}

TEST_CASE("half-integers round up") {
  CHECK(round_half_up(0.5) == 1.0);
  CHECK(round_half_up(-0.5) == 0.0);
  CHECK(round_half_up(-2.5) == -2.0);
  CHECK(round_half_up(2.4999999) == 2.0);
  // pi/M sits exactly halfway for M = 4 in floating point.
  CHECK(grid_index(pi / 4, 4) == 1);
  CHECK(grid_index(-pi / 4, 4) == 0);
}

TEST_CASE("wrap properties") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1e3, 1e3);
  for (int n = 0; n < 5000; ++n) {
    const double x = U(rng);
    const double w = wrap_pi(x);
    CHECK(w >= -pi);
    CHECK(w < pi);
    CHECK(std::abs(std::remainder(x - w, two_pi)) < 1e-9);
    for (int M : {2, 4, 8}) {
      const double f = wrap_frac(x, M);
      CHECK(f >= -pi / M);
      CHECK(f < pi / M);
      CHECK(round_to_grid(x, M) + f == doctest::Approx(x).epsilon(1e-12));
      CHECK(wrap_frac(x + two_pi / M, M) == doctest::Approx(f).epsilon(1e-9));
    }
  }
}

TEST_CASE("angle errors") {
  CHECK_THROWS_AS(wrap_pi(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  CHECK_THROWS_AS(wrap_pi(std::numeric_limits<double>::infinity()), std::domain_error);
  CHECK_THROWS_AS(wrap_frac(0.0, 1), std::domain_error);
  CHECK_THROWS_AS(round_to_grid(0.0, 0), std::domain_error);
}
