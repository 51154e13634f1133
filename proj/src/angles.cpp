#include "pilotsync/angles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pilotsync {

namespace {

void require_finite(double x, const char* where) {
  if (!std::isfinite(x)) {
    throw std::domain_error(std::string(where) + ": non-finite angle");
  }
}

void require_order(int M, const char* where) {
  if (M < 2) {
    throw std::domain_error(std::string(where) + ": constellation size must be >= 2, got " +
                            std::to_string(M));
  }
}

// Nearest multiple of `step` to x, returned as the integer multiplier. The
// remainder x - k*step is forced into [-step/2, step/2) so that the
// half-open interval contract survives floating-point error in x/step.
std::int64_t nearest_multiple(double x, double step) {
  auto k = static_cast<std::int64_t>(std::floor(x / step + 0.5));
  const double r = x - static_cast<double>(k) * step;
  if (r >= 0.5 * step) {
    ++k;
  } else if (r < -0.5 * step) {
    --k;
  }
  return k;
}

}  // namespace

double round_half_up(double x) { return std::floor(x + 0.5); }

double wrap_pi(double x) {
  require_finite(x, "wrap_pi");
  const auto k = nearest_multiple(x, two_pi);
  return x - static_cast<double>(k) * two_pi;
}

std::int64_t grid_index(double x, int M) {
  require_finite(x, "grid_index");
  require_order(M, "grid_index");
  return nearest_multiple(x, two_pi / M);
}

double round_to_grid(double x, int M) {
  return static_cast<double>(grid_index(x, M)) * (two_pi / M);
}

double wrap_frac(double x, int M) {
  return x - round_to_grid(x, M);
}

}  // namespace pilotsync
