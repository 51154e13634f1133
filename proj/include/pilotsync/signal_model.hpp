#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pilotsync {

using cplx = std::complex<double>;

/// Randomness stream used throughout. Streams are always passed explicitly.
using Rng = std::mt19937_64;

/// Derive an independent stream seed from a master seed and a counter tuple.
/// Counter-based: the result depends only on the arguments, never on call order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// M-PSK constellation; symbol k is exp(j*2*pi*k/M).
class Constellation {
 public:
  explicit Constellation(int M);

  int size() const noexcept { return static_cast<int>(points_.size()); }
  double step() const noexcept;
  /// Symbol for any integer k (taken modulo M).
  cplx symbol(std::int64_t k) const noexcept;
  std::span<const cplx> points() const noexcept { return points_; }

  /// True if s has unit modulus and phase on the 2*pi/M grid (within tol).
  bool contains(cplx s, double tol = 1e-12) const noexcept;

 private:
  std::vector<cplx> points_;
};

enum class PilotLayout {
  prefix,  ///< pilots occupy indices 0..|P|-1
  spread,  ///< pilots evenly spaced over the frame
};

/// Index sets P and D together with the known pilot values.
class FramePlan {
 public:
  /// Throws std::invalid_argument when positions repeat, fall outside
  /// [0, length), or a pilot value is not a constellation point.
  FramePlan(std::size_t length, std::vector<std::size_t> pilot_positions,
            std::vector<cplx> pilot_symbols, int M);

  /// All-ones pilots placed according to `layout`.
  static FramePlan make(std::size_t length, std::size_t pilot_count, int M,
                        PilotLayout layout = PilotLayout::prefix);

  std::size_t length() const noexcept { return length_; }
  int order() const noexcept { return M_; }
  std::span<const std::size_t> pilot_positions() const noexcept { return pilot_positions_; }
  std::span<const std::size_t> data_positions() const noexcept { return data_positions_; }
  std::span<const cplx> pilot_symbols() const noexcept { return pilot_symbols_; }
  std::size_t pilot_count() const noexcept { return pilot_positions_.size(); }
  std::size_t data_count() const noexcept { return data_positions_.size(); }

 private:
  std::size_t length_;
  int M_;
  std::vector<std::size_t> pilot_positions_;
  std::vector<std::size_t> data_positions_;
  std::vector<cplx> pilot_symbols_;
};

/// a0 = rho0 * exp(j*theta0).
struct ChannelParams {
  double rho0 = 1.0;
  double theta0 = 0.0;

  cplx gain() const { return std::polar(rho0, theta0); }
};

/// I.i.d. circularly symmetric complex noise.
class NoiseModel {
 public:
  virtual ~NoiseModel() = default;

  virtual cplx draw(Rng& rng) const = 0;
  /// Fills `out` with independent draws. Overridden where a distribution
  /// object can be reused across draws.
  virtual void fill(std::span<cplx> out, Rng& rng) const;
  /// E|w|^2; may be +inf.
  virtual double second_moment() const = 0;
  virtual std::string name() const = 0;
};

/// Real and imaginary parts independent N(0, sigma^2).
class GaussianNoise final : public NoiseModel {
 public:
  explicit GaussianNoise(double sigma);
  cplx draw(Rng& rng) const override;
  void fill(std::span<cplx> out, Rng& rng) const override;
  double second_moment() const override { return 2.0 * sigma_ * sigma_; }
  std::string name() const override { return "gaussian"; }
  double sigma() const noexcept { return sigma_; }

 private:
  double sigma_;
};

/// Fixed modulus |w| = radius with uniform phase.
class RingNoise final : public NoiseModel {
 public:
  explicit RingNoise(double radius);
  cplx draw(Rng& rng) const override;
  double second_moment() const override { return radius_ * radius_; }
  std::string name() const override { return "ring"; }
  double radius() const noexcept { return radius_; }

 private:
  double radius_;
};

/// Degenerate model producing w = 0; used for noiseless checks.
class NullNoise final : public NoiseModel {
 public:
  cplx draw(Rng&) const override { return {0.0, 0.0}; }
  double second_moment() const override { return 0.0; }
  std::string name() const override { return "none"; }
};

/// Complex samples y_i aligned with a FramePlan.
class ReceivedFrame {
 public:
  ReceivedFrame(std::shared_ptr<const FramePlan> plan, std::vector<cplx> samples);

  const FramePlan& plan() const noexcept { return *plan_; }
  std::shared_ptr<const FramePlan> plan_ptr() const noexcept { return plan_; }
  std::span<const cplx> samples() const noexcept { return samples_; }
  cplx operator[](std::size_t i) const noexcept { return samples_[i]; }

 private:
  std::shared_ptr<const FramePlan> plan_;
  std::vector<cplx> samples_;
};

/// Transmitted sequence: plan pilots at P, uniform random symbols at D.
std::vector<cplx> random_frame(const FramePlan& plan, const Constellation& constellation, Rng& rng);

/// y_i = a0 * s_i + w_i with fresh noise draws.
ReceivedFrame apply_channel(std::shared_ptr<const FramePlan> plan, std::span<const cplx> symbols,
                            const ChannelParams& params, const NoiseModel& noise, Rng& rng);

/// Per-component noise deviation for SNR = rho0^2 / (2 sigma^2) given in dB.
double snr_to_sigma(double snr_db, double rho0);

/// kappa = rho0^2 / (2 sigma^2) as a linear ratio.
double snr_db_to_kappa(double snr_db);

}  // namespace pilotsync
