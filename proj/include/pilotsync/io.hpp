#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pilotsync/montecarlo.hpp"
#include "pilotsync/signal_model.hpp"

namespace pilotsync {

/// Malformed input; the message names the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline constexpr std::string_view sample_csv_header = "index,re_y,im_y,is_pilot,re_p,im_p";

/// Reads `index,re_y,im_y,is_pilot,re_p,im_p` rows (pilot columns empty on
/// data rows). Indices must cover 0..n-1 exactly once.
ReceivedFrame read_sample_csv(std::istream& in, int M);

void write_sample_csv(std::ostream& out, const ReceivedFrame& frame);

/// `start:step:stop` (inclusive), a single value, or a comma-separated list.
std::vector<double> parse_snr_grid(std::string_view text);

/// 17 significant digits (round-trips doubles exactly); NaN -> "".
std::string format_number(double value);

/// One row per (SNR, estimator); results are interleaved by SNR index.
void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& results);

nlohmann::json to_json(const SweepConfig& config);
SweepConfig sweep_config_from_json(const nlohmann::json& j);

std::string_view to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(std::string_view name);
std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);
std::string_view to_string(PilotLayout layout);
PilotLayout pilot_layout_from_string(std::string_view name);

}  // namespace pilotsync
