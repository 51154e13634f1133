#pragma once

#include <cstdint>
#include <numbers>

namespace pilotsync {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Nearest integer with half-integers rounded toward +inf.
double round_half_up(double x);

/// x reduced modulo 2*pi into [-pi, pi). Throws std::domain_error for non-finite x.
double wrap_pi(double x);

/// x reduced modulo 2*pi/M into [-pi/M, pi/M).
double wrap_frac(double x, int M);

/// Nearest multiple of 2*pi/M to x (ties toward +inf). Satisfies
/// x == round_to_grid(x, M) + wrap_frac(x, M) up to rounding.
double round_to_grid(double x, int M);

/// Integer k with round_to_grid(x, M) == k * 2*pi/M.
std::int64_t grid_index(double x, int M);

}  // namespace pilotsync
