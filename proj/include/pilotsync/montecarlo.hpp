#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pilotsync/signal_model.hpp"

namespace pilotsync {

enum class EstimatorKind { mackenthun, pilot_only, viterbi_viterbi, weighted };

struct EstimatorChoice {
  EstimatorKind kind = EstimatorKind::mackenthun;
  double beta = 1.0;  ///< used by EstimatorKind::weighted

  std::string label() const;
};

enum class NoiseKind {
  gaussian,  ///< per-component sigma from the SNR
  ring,      ///< |w| fixed with E|w|^2 = 2 sigma^2
  none,      ///< noiseless
};

struct SweepConfig {
  int M = 4;
  std::size_t L = 4096;
  std::size_t pilot_count = 0;
  PilotLayout layout = PilotLayout::prefix;
  std::vector<double> snr_grid_db;
  std::size_t trials = 5000;
  double rho0 = 1.0;
  std::uint64_t master_seed = 1;
  EstimatorChoice estimator;
  NoiseKind noise = NoiseKind::gaussian;
  /// Worker threads; 0 selects the hardware concurrency. Never affects results.
  unsigned threads = 0;
  /// Samples used by constants_mc when the noise has no closed-form theory.
  std::size_t theory_mc_samples = 1'000'000;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

struct SweepRow {
  double snr_db = 0.0;
  bool coherent = true;
  double mse_phase_sim = 0.0;
  double se_phase = 0.0;
  /// Mean of (rho_hat - rho0 G(0))^2; NaN when the estimator has no amplitude.
  double var_amp_sim = 0.0;
  double se_amp = 0.0;
  double amp_mean_sim = 0.0;
  double se_amp_mean = 0.0;
  /// Sample covariance of phase error and centered amplitude error.
  double cross_cov_sim = 0.0;
  double se_cross = 0.0;
  /// G(0) used to center the amplitude error.
  double g0_used = 1.0;
  std::optional<double> mse_phase_theory;
  std::optional<double> var_amp_theory;
  std::optional<double> amp_mean_theory;
  /// "ok", "out_of_range", "breakdown" or "unavailable".
  std::string theory_status = "unavailable";
};

struct SweepResult {
  SweepConfig config;
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
};

/// Coherent: <theta_hat - theta0>_pi. Noncoherent: <theta_hat - theta0> modulo 2 pi / M.
double phase_error(double theta_hat, double theta0, bool coherent, int M);

/// rho_hat - rho0 * G0.
double amp_error(double rho_hat, double rho0, double G0);

/// Compensated (Neumaier) sum, evaluated in index order.
double stable_sum(std::span<const double> values);

/// Simulates every SNR point of the grid. Trial t at SNR index s draws all
/// randomness from a stream keyed by (master_seed, s, t), so the result is
/// bitwise independent of thread count and of other grid points.
SweepResult run_sweep(const SweepConfig& config);

}  // namespace pilotsync
