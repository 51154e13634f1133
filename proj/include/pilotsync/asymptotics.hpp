#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pilotsync/signal_model.hpp"

namespace pilotsync {

/// Smallest kappa = rho0^2 / (2 sigma^2) for which Gaussian constants are computed.
inline constexpr double kappa_floor = 0.01;

/// Raised when the asymptotic covariance is undefined (p + H d <= 0) or the
/// operating point lies outside the supported range.
class TheoryOutOfRange : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when an adaptive integral misses its tolerance.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

struct TheoryInput {
  int M = 4;
  double p = 1.0;  ///< pilot fraction |P|/L
  double d = 0.0;  ///< data fraction |D|/L
  double kappa = 1.0;
  double rho0 = 1.0;

  static TheoryInput from_counts(int M, std::size_t L, std::size_t pilots, double kappa,
                                 double rho0 = 1.0);
};

/// Standard errors attached to Monte-Carlo figures.
struct FigureErrors {
  double h1_0 = 0.0;
  double h2_0 = 0.0;
  double H = 0.0;
  double A1 = 0.0;
  double A2 = 0.0;
  double B1 = 0.0;
  double B2 = 0.0;
  std::vector<double> g_at_boundaries;
};

/// Constants of the limiting covariance for one (M, noise) pair, where
/// R exp(j Phi) = 1 + w / rho0 and <.> reduces modulo 2 pi / M:
///   h1_0 = E R cos Phi,            h2_0 = E R cos<Phi>
///   A1 = E R^2 sin^2 Phi,          A2 = E R^2 sin^2 <Phi>
///   B1 = E R^2 cos^2 Phi - 1,      B2 = E R^2 cos^2 <Phi> - h2_0^2
///   H  = h2_0 - 2 sin(pi/M) sum_k g(2 pi k/M + pi/M)
struct NoiseFigures {
  int M = 0;
  double h1_0 = 1.0;
  double h2_0 = 1.0;
  double H = 1.0;
  double A1 = 0.0;
  double A2 = 0.0;
  double B1 = 0.0;
  double B2 = 0.0;
  std::vector<double> g_at_boundaries;

  /// Largest integration error estimate (quadrature) or zero (Monte Carlo).
  double quadrature_error = 0.0;
  /// Present for Monte-Carlo figures.
  std::optional<FigureErrors> standard_errors;
  /// Half-width of the bins used to estimate g at the boundaries (Monte Carlo);
  /// the bin average differs from g by O(delta^2).
  double boundary_bin_halfwidth = 0.0;
  /// False when the sample moments look unstable (e.g. infinite E|w|^2).
  bool reliable = true;

  /// G(0) = p * h1(0) + d * h2(0), with h1(0) = 1 exactly.
  double G0(double p, double d) const { return p + d * h2_0; }
};

struct CovariancePrediction {
  double phase_var = 0.0;
  double amp_var = 0.0;
  double cross = 0.0;
  double amp_mean = 0.0;
  std::size_t L = 0;
};

/// Adaptive Gauss-Kronrod integral of f over [a, b]. Throws QuadratureError
/// when the error estimate exceeds max(abs_tol, rel_tol * |result|).
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10, double* error = nullptr);

/// Normal CDF.
double normal_cdf(double t);

/// g(phi) = int_0^inf r f(r, phi) dr for Gaussian noise, closed form.
double gaussian_g(double phi, double kappa);

/// Joint density of (R, Phi) for Gaussian noise: (kappa r / pi) exp(-kappa (r^2 - 2 r cos phi + 1)).
double gaussian_joint_pdf(double r, double phi, double kappa);

/// h1(x) = E R cos(x + Phi) by quadrature against g.
double gaussian_h1(double x, double kappa);
/// h2(x) = E R cos<x + Phi> by quadrature against g.
double gaussian_h2(double x, int M, double kappa);
/// E R sin<Phi> (zero by symmetry of g).
double gaussian_mean_sin_wrapped(int M, double kappa);

/// Second moments E R^2 w(Phi) by 2D quadrature of the joint density, for
/// weight w(phi) = sin^2 phi, sin^2 <phi>, cos^2 phi, cos^2 <phi>.
enum class SecondMoment { sin2, sin2_wrapped, cos2, cos2_wrapped };
double gaussian_second_moment(SecondMoment which, int M, double kappa, double* error = nullptr);

/// All figures for Gaussian noise at SNR ratio kappa. Throws TheoryOutOfRange
/// for kappa below kappa_floor.
NoiseFigures constants_gaussian(int M, double kappa);

/// Monte-Carlo figures for any circularly symmetric noise model.
/// Deterministic for fixed (seed, samples).
NoiseFigures constants_mc(const NoiseModel& noise, int M, double rho0, std::size_t samples,
                          std::uint64_t seed);

/// Finite-L covariance of (phase error, centered amplitude error).
/// Throws TheoryOutOfRange when p + H d <= 0.
CovariancePrediction predict(const NoiseFigures& figures, const TheoryInput& input, std::size_t L);

}  // namespace pilotsync
