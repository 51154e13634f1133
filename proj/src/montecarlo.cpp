#include "pilotsync/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pilotsync/angles.hpp"
#include "pilotsync/asymptotics.hpp"
#include "pilotsync/estimators.hpp"

namespace pilotsync {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct TrialOutcome {
  double phase_err = 0.0;
  double rho_hat = nan;
};

std::unique_ptr<NoiseModel> make_noise(NoiseKind kind, double snr_db, double rho0) {
  switch (kind) {
    case NoiseKind::gaussian:
      return std::make_unique<GaussianNoise>(snr_to_sigma(snr_db, rho0));
    case NoiseKind::ring:
      return std::make_unique<RingNoise>(std::sqrt(2.0) * snr_to_sigma(snr_db, rho0));
    case NoiseKind::none:
      return std::make_unique<NullNoise>();
  }
  throw std::invalid_argument("unknown noise kind");
}

bool is_coherent(const SweepConfig& c) {
  return c.pilot_count > 0 && c.estimator.kind != EstimatorKind::viterbi_viterbi;
}

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

Stats mean_and_se(std::span<const double> v) {
  Stats s;
  const double n = static_cast<double>(v.size());
  s.mean = stable_sum(v) / n;
  if (v.size() > 1) {
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - s.mean) * (v[i] - s.mean);
    s.se = std::sqrt(stable_sum(dev) / (n - 1.0) / n);
  }
  return s;
}

// Theory for one grid point; fills the theory columns and returns G(0).
double attach_theory(const SweepConfig& c, std::size_t snr_index, SweepRow& row) {
  const bool weighted = c.estimator.kind == EstimatorKind::weighted && c.estimator.beta != 1.0;
  if (c.noise == NoiseKind::none || c.estimator.kind == EstimatorKind::viterbi_viterbi || weighted) {
    row.theory_status = "unavailable";
    return c.estimator.kind == EstimatorKind::pilot_only || c.noise == NoiseKind::none ? 1.0 : nan;
  }
  const double kappa = snr_db_to_kappa(row.snr_db);
  std::size_t L = c.L;
  std::size_t pilots = c.pilot_count;
  if (c.estimator.kind == EstimatorKind::pilot_only) {
    L = c.pilot_count;
    pilots = c.pilot_count;
  }
  const auto input = TheoryInput::from_counts(c.M, L, pilots, kappa, c.rho0);
  NoiseFigures figures;
  try {
    if (c.noise == NoiseKind::gaussian) {
      figures = constants_gaussian(c.M, kappa);
    } else {
      const RingNoise ring(std::sqrt(2.0) * snr_to_sigma(row.snr_db, c.rho0));
      figures = constants_mc(ring, c.M, c.rho0, c.theory_mc_samples,
                             derive_seed(c.master_seed, snr_index, 0x7468656f7279ULL));
    }
  } catch (const TheoryOutOfRange&) {
    row.theory_status = "out_of_range";
    return c.estimator.kind == EstimatorKind::pilot_only ? 1.0 : nan;
  }
  const double g0 = figures.G0(input.p, input.d);
  row.amp_mean_theory = c.rho0 * g0;
  try {
    const auto prediction = predict(figures, input, L);
    row.mse_phase_theory = prediction.phase_var;
    row.var_amp_theory = prediction.amp_var;
    row.theory_status = "ok";
  } catch (const TheoryOutOfRange&) {
    row.theory_status = "breakdown";
  }
  return g0;
}

TrialOutcome run_trial(const SweepConfig& c, const std::shared_ptr<const FramePlan>& plan,
                       const Constellation& constellation, const NoiseModel& noise, bool coherent,
                       std::size_t snr_index, std::size_t trial) {
  Rng rng(derive_seed(c.master_seed, snr_index, trial));
  std::uniform_real_distribution<double> uniform_phase(-pi, pi);
  const double theta0 = uniform_phase(rng);
  const auto symbols = random_frame(*plan, constellation, rng);
  const auto frame = apply_channel(plan, symbols, {c.rho0, theta0}, noise, rng);

  TrialOutcome out;
  double theta_hat = 0.0;
  switch (c.estimator.kind) {
    case EstimatorKind::mackenthun:
    case EstimatorKind::weighted: {
      const double beta = c.estimator.kind == EstimatorKind::weighted ? c.estimator.beta : 1.0;
      const auto report = mackenthun(frame, c.M, beta);
      theta_hat = report.amplitude.theta;
      out.rho_hat = report.amplitude.rho;
      break;
    }
    case EstimatorKind::pilot_only: {
      const auto a = pilot_only(frame);
      theta_hat = a.theta;
      out.rho_hat = a.rho;
      break;
    }
    case EstimatorKind::viterbi_viterbi:
      theta_hat = viterbi_viterbi(frame, c.M);
      break;
  }
  out.phase_err = phase_error(theta_hat, theta0, coherent, c.M);
  return out;
}

}  // namespace

std::string EstimatorChoice::label() const {
  switch (kind) {
    case EstimatorKind::mackenthun: return "mackenthun";
    case EstimatorKind::pilot_only: return "pilot";
    case EstimatorKind::viterbi_viterbi: return "vv";
    case EstimatorKind::weighted: return "weighted";
  }
  return "unknown";
}

void SweepConfig::validate() const {
  if (M < 2) throw std::invalid_argument("M must be >= 2");
  if (L < 1) throw std::invalid_argument("L must be >= 1");
  if (pilot_count > L) throw std::invalid_argument("pilot count exceeds L");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (snr_grid_db.empty()) throw std::invalid_argument("SNR grid is empty");
  if (!(rho0 > 0.0)) throw std::invalid_argument("rho0 must be positive");
  if (estimator.kind == EstimatorKind::weighted && !(estimator.beta > 0.0)) {
    throw std::invalid_argument("beta must be positive");
  }
  if (estimator.kind == EstimatorKind::pilot_only && pilot_count == 0) {
    throw std::invalid_argument("pilot-only estimation needs at least one pilot");
  }
  if (noise == NoiseKind::ring && theory_mc_samples < 10'000) {
    throw std::invalid_argument("theory Monte-Carlo samples must be >= 10^4");
  }
}

double phase_error(double theta_hat, double theta0, bool coherent, int M) {
  const double diff = theta_hat - theta0;
  return coherent ? wrap_pi(diff) : wrap_frac(diff, M);
}

double amp_error(double rho_hat, double rho0, double G0) { return rho_hat - rho0 * G0; }

double stable_sum(std::span<const double> values) {
  double sum = 0.0;
  double compensation = 0.0;
  for (const double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      compensation += (sum - t) + v;
    } else {
      compensation += (v - t) + sum;
    }
    sum = t;
  }
  return sum + compensation;
}

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  SweepResult result;
  result.config = config;
  if (config.estimator.kind == EstimatorKind::viterbi_viterbi && config.pilot_count > 0) {
    result.warnings.emplace_back("viterbi_viterbi ignores pilot knowledge; pilots are treated as data");
  }

  const auto plan = std::make_shared<const FramePlan>(
      FramePlan::make(config.L, config.pilot_count, config.M, config.layout));
  const Constellation constellation(config.M);
  const bool coherent = is_coherent(config);
  const bool has_amplitude = config.estimator.kind != EstimatorKind::viterbi_viterbi;

  unsigned workers = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, config.trials));

  for (std::size_t s = 0; s < config.snr_grid_db.size(); ++s) {
    SweepRow row;
    row.snr_db = config.snr_grid_db[s];
    row.coherent = coherent;
    double g0 = attach_theory(config, s, row);

    const auto noise = make_noise(config.noise, row.snr_db, config.rho0);
    std::vector<TrialOutcome> outcomes(config.trials);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t t = w; t < config.trials; t += workers) {
              outcomes[t] = run_trial(config, plan, constellation, *noise, coherent, s, t);
            }
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);

    const std::size_t T = config.trials;
    std::vector<double> phase_sq(T);
    for (std::size_t t = 0; t < T; ++t) phase_sq[t] = outcomes[t].phase_err * outcomes[t].phase_err;
    const auto phase = mean_and_se(phase_sq);
    row.mse_phase_sim = phase.mean;
    row.se_phase = phase.se;

    if (!has_amplitude) {
      row.var_amp_sim = row.se_amp = row.amp_mean_sim = row.se_amp_mean = nan;
      row.cross_cov_sim = row.se_cross = nan;
      row.g0_used = nan;
      result.rows.push_back(std::move(row));
      continue;
    }

    std::vector<double> rho(T);
    for (std::size_t t = 0; t < T; ++t) rho[t] = outcomes[t].rho_hat;
    const auto rho_stats = mean_and_se(rho);
    row.amp_mean_sim = rho_stats.mean;
    row.se_amp_mean = rho_stats.se;
    if (!std::isfinite(g0)) {
      // No theory for G(0): center on the sample mean instead.
      g0 = rho_stats.mean / config.rho0;
      result.warnings.push_back("SNR " + std::to_string(row.snr_db) +
                                " dB: amplitude error centered on the sample mean");
    }
    row.g0_used = g0;

    std::vector<double> amp_sq(T);
    std::vector<double> phase_err(T);
    std::vector<double> amp_err(T);
    for (std::size_t t = 0; t < T; ++t) {
      amp_err[t] = amp_error(rho[t], config.rho0, g0);
      amp_sq[t] = amp_err[t] * amp_err[t];
      phase_err[t] = outcomes[t].phase_err;
    }
    const auto amp = mean_and_se(amp_sq);
    row.var_amp_sim = amp.mean;
    row.se_amp = amp.se;

    const double phase_mean = stable_sum(phase_err) / static_cast<double>(T);
    const double amp_mean = stable_sum(amp_err) / static_cast<double>(T);
    std::vector<double> products(T);
    for (std::size_t t = 0; t < T; ++t) products[t] = (phase_err[t] - phase_mean) * (amp_err[t] - amp_mean);
    const auto cross = mean_and_se(products);
    row.cross_cov_sim = cross.mean;
    row.se_cross = cross.se;

    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace pilotsync
