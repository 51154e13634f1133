#include "pilotsync/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pilotsync/angles.hpp"

namespace pilotsync {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// exp(j*2*pi*k/M), exact on the real and imaginary axes.
cplx unit_symbol(std::int64_t k, int M) {
  const std::int64_t r = ((k % M) + M) % M;
  if ((4 * r) % M == 0) {
    switch ((4 * r) / M) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  return std::polar(1.0, two_pi * static_cast<double>(r) / M);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

Constellation::Constellation(int M) {
  if (M < 2) {
    throw std::domain_error("Constellation: M must be >= 2, got " + std::to_string(M));
  }
  points_.reserve(static_cast<std::size_t>(M));
  for (int k = 0; k < M; ++k) {
    points_.push_back(unit_symbol(k, M));
  }
}

double Constellation::step() const noexcept { return two_pi / size(); }

cplx Constellation::symbol(std::int64_t k) const noexcept {
  const auto M = static_cast<std::int64_t>(points_.size());
  return points_[static_cast<std::size_t>(((k % M) + M) % M)];
}

bool Constellation::contains(cplx s, double tol) const noexcept {
  return std::any_of(points_.begin(), points_.end(),
                     [&](cplx p) { return std::abs(s - p) <= tol; });
}

FramePlan::FramePlan(std::size_t length, std::vector<std::size_t> pilot_positions,
                     std::vector<cplx> pilot_symbols, int M)
    : length_(length),
      M_(M),
      pilot_positions_(std::move(pilot_positions)),
      pilot_symbols_(std::move(pilot_symbols)) {
  const Constellation constellation(M);
  if (pilot_positions_.size() != pilot_symbols_.size()) {
    throw std::invalid_argument("FramePlan: pilot position and value counts differ");
  }
  std::vector<bool> is_pilot(length_, false);
  for (std::size_t n = 0; n < pilot_positions_.size(); ++n) {
    const auto i = pilot_positions_[n];
    if (i >= length_) {
      throw std::invalid_argument("FramePlan: pilot position " + std::to_string(i) +
                                  " outside frame of length " + std::to_string(length_));
    }
    if (is_pilot[i]) {
      throw std::invalid_argument("FramePlan: duplicate pilot position " + std::to_string(i));
    }
    if (!constellation.contains(pilot_symbols_[n])) {
      throw std::invalid_argument("FramePlan: pilot at position " + std::to_string(i) +
                                  " is not a " + std::to_string(M) + "-PSK symbol");
    }
    is_pilot[i] = true;
  }
  data_positions_.reserve(length_ - pilot_positions_.size());
  for (std::size_t i = 0; i < length_; ++i) {
    if (!is_pilot[i]) data_positions_.push_back(i);
  }
}

FramePlan FramePlan::make(std::size_t length, std::size_t pilot_count, int M, PilotLayout layout) {
  if (pilot_count > length) {
    throw std::invalid_argument("FramePlan: more pilots than symbols");
  }
  std::vector<std::size_t> positions(pilot_count);
  for (std::size_t n = 0; n < pilot_count; ++n) {
    positions[n] = layout == PilotLayout::prefix ? n : (n * length) / pilot_count;
  }
  return FramePlan(length, std::move(positions), std::vector<cplx>(pilot_count, cplx{1.0, 0.0}), M);
}

void NoiseModel::fill(std::span<cplx> out, Rng& rng) const {
  for (auto& w : out) w = draw(rng);
}

GaussianNoise::GaussianNoise(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("GaussianNoise: sigma must be positive and finite");
  }
}

cplx GaussianNoise::draw(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, sigma_);
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

void GaussianNoise::fill(std::span<cplx> out, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, sigma_);
  for (auto& w : out) {
    const double re = normal(rng);
    const double im = normal(rng);
    w = {re, im};
  }
}

RingNoise::RingNoise(double radius) : radius_(radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("RingNoise: radius must be positive and finite");
  }
}

cplx RingNoise::draw(Rng& rng) const {
  std::uniform_real_distribution<double> phase(-pi, pi);
  return std::polar(radius_, phase(rng));
}

ReceivedFrame::ReceivedFrame(std::shared_ptr<const FramePlan> plan, std::vector<cplx> samples)
    : plan_(std::move(plan)), samples_(std::move(samples)) {
  if (!plan_) throw std::invalid_argument("ReceivedFrame: null plan");
  if (samples_.size() != plan_->length()) {
    throw std::invalid_argument("ReceivedFrame: " + std::to_string(samples_.size()) +
                                " samples for a plan of length " + std::to_string(plan_->length()));
  }
}

std::vector<cplx> random_frame(const FramePlan& plan, const Constellation& constellation, Rng& rng) {
  if (constellation.size() != plan.order()) {
    throw std::invalid_argument("random_frame: constellation order does not match plan");
  }
  std::vector<cplx> symbols(plan.length());
  const auto pilots = plan.pilot_positions();
  const auto values = plan.pilot_symbols();
  for (std::size_t n = 0; n < pilots.size(); ++n) symbols[pilots[n]] = values[n];
  std::uniform_int_distribution<int> pick(0, constellation.size() - 1);
  for (const auto i : plan.data_positions()) symbols[i] = constellation.symbol(pick(rng));
  return symbols;
}

ReceivedFrame apply_channel(std::shared_ptr<const FramePlan> plan, std::span<const cplx> symbols,
                            const ChannelParams& params, const NoiseModel& noise, Rng& rng) {
  if (!(params.rho0 > 0.0)) throw std::invalid_argument("apply_channel: rho0 must be positive");
  std::vector<cplx> y(symbols.size());
  noise.fill(y, rng);
  const cplx a0 = params.gain();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a0 * symbols[i];
  return ReceivedFrame(std::move(plan), std::move(y));
}

double snr_db_to_kappa(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

double snr_to_sigma(double snr_db, double rho0) {
  if (!(rho0 > 0.0)) throw std::invalid_argument("snr_to_sigma: rho0 must be positive");
  return rho0 / std::sqrt(2.0 * snr_db_to_kappa(snr_db));
}

}  // namespace pilotsync
