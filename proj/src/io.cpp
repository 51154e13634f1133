#include "pilotsync/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace pilotsync {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, std::size_t& out) {
  s = trim(s);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

ReceivedFrame read_sample_csv(std::istream& in, int M) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (trim(line) != sample_csv_header) {
      throw ParseError(line_no, "expected header '" + std::string(sample_csv_header) + "'");
    }
    have_header = true;
    break;
  }
  if (!have_header) throw ParseError(line_no, "empty input: no header row");

  struct Row {
    cplx y;
    bool pilot;
    cplx p;
  };
  std::vector<Row> rows;
  std::vector<std::size_t> row_line;
  std::vector<bool> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 6) {
      throw ParseError(line_no, "expected 6 fields, found " + std::to_string(fields.size()));
    }
    std::size_t index = 0;
    if (!parse_index(fields[0], index)) throw ParseError(line_no, "bad index");
    double re = 0.0;
    double im = 0.0;
    if (!parse_double(fields[1], re) || !parse_double(fields[2], im)) {
      throw ParseError(line_no, "bad sample value");
    }
    const auto flag = trim(fields[3]);
    if (flag != "0" && flag != "1") throw ParseError(line_no, "is_pilot must be 0 or 1");
    Row row{{re, im}, flag == "1", {0.0, 0.0}};
    if (row.pilot) {
      double pre = 0.0;
      double pim = 0.0;
      if (!parse_double(fields[4], pre) || !parse_double(fields[5], pim)) {
        throw ParseError(line_no, "pilot row needs re_p and im_p");
      }
      row.p = {pre, pim};
    } else if (!trim(fields[4]).empty() || !trim(fields[5]).empty()) {
      throw ParseError(line_no, "data row must leave re_p and im_p empty");
    }
    if (index >= seen.size()) {
      seen.resize(index + 1, false);
      rows.resize(index + 1);
      row_line.resize(index + 1, 0);
    }
    if (seen[index]) throw ParseError(line_no, "duplicate index " + std::to_string(index));
    seen[index] = true;
    rows[index] = row;
    row_line[index] = line_no;
  }
  if (rows.empty()) throw ParseError(line_no, "no sample rows");
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw ParseError(line_no, "index " + std::to_string(i) + " missing");
  }

  std::vector<std::size_t> positions;
  std::vector<cplx> values;
  std::vector<cplx> samples;
  const Constellation constellation(M);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    samples.push_back(rows[i].y);
    if (!rows[i].pilot) continue;
    if (!constellation.contains(rows[i].p, 1e-9)) {
      throw ParseError(row_line[i], "pilot value is not a " + std::to_string(M) + "-PSK symbol");
    }
    positions.push_back(i);
    // Snap to the exact constellation point.
    cplx nearest = constellation.symbol(0);
    for (const auto s : constellation.points()) {
      if (std::abs(s - rows[i].p) < std::abs(nearest - rows[i].p)) nearest = s;
    }
    values.push_back(nearest);
  }
  auto plan = std::make_shared<const FramePlan>(rows.size(), std::move(positions), std::move(values), M);
  return ReceivedFrame(std::move(plan), std::move(samples));
}

void write_sample_csv(std::ostream& out, const ReceivedFrame& frame) {
  const auto& plan = frame.plan();
  std::vector<int> pilot_slot(plan.length(), -1);
  const auto positions = plan.pilot_positions();
  for (std::size_t n = 0; n < positions.size(); ++n) pilot_slot[positions[n]] = static_cast<int>(n);
  out << sample_csv_header << '\n';
  for (std::size_t i = 0; i < plan.length(); ++i) {
    out << i << ',' << format_number(frame[i].real()) << ',' << format_number(frame[i].imag()) << ',';
    if (pilot_slot[i] >= 0) {
      const cplx p = plan.pilot_symbols()[static_cast<std::size_t>(pilot_slot[i])];
      out << "1," << format_number(p.real()) << ',' << format_number(p.imag()) << '\n';
    } else {
      out << "0,,\n";
    }
  }
}

std::vector<double> parse_snr_grid(std::string_view text) {
  auto number = [&](std::string_view s) {
    double v = 0.0;
    if (!parse_double(s, v)) throw std::invalid_argument("bad SNR value '" + std::string(s) + "'");
    return v;
  };
  text = trim(text);
  if (text.empty()) throw std::invalid_argument("empty SNR grid");
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw std::invalid_argument("SNR range must be start:step:stop");
    const double start = number(parts[0]);
    const double step = number(parts[1]);
    const double stop = number(parts[2]);
    if (!(step > 0.0) || stop < start) throw std::invalid_argument("SNR range needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i) grid[i] = start + static_cast<double>(i) * step;
    return grid;
  }
  std::vector<double> grid;
  for (const auto part : split(text, ',')) grid.push_back(number(part));
  return grid;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& results) {
  out << "snr_db,estimator,beta,noise,M,L,pilots,trials,coherent,mse_phase_sim,se_phase,"
         "var_amp_sim,se_amp,amp_mean_sim,se_amp_mean,cross_cov_sim,se_cross,g0_used,"
         "mse_phase_theory,var_amp_theory,amp_mean_theory,theory_status\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::size_t rows = 0;
  for (const auto& r : results) rows = std::max(rows, r.rows.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (const auto& result : results) {
      if (i >= result.rows.size()) continue;
      const auto& c = result.config;
      const auto& row = result.rows[i];
      out << format_number(row.snr_db) << ',' << c.estimator.label() << ','
          << format_number(c.estimator.kind == EstimatorKind::weighted ? c.estimator.beta : 1.0) << ','
          << to_string(c.noise) << ',' << c.M << ',' << c.L << ',' << c.pilot_count << ','
          << c.trials << ',' << (row.coherent ? 1 : 0) << ',' << format_number(row.mse_phase_sim)
          << ',' << format_number(row.se_phase) << ',' << format_number(row.var_amp_sim) << ','
          << format_number(row.se_amp) << ',' << format_number(row.amp_mean_sim) << ','
          << format_number(row.se_amp_mean) << ',' << format_number(row.cross_cov_sim) << ','
          << format_number(row.se_cross) << ',' << format_number(row.g0_used) << ','
          << opt(row.mse_phase_theory) << ',' << opt(row.var_amp_theory) << ','
          << opt(row.amp_mean_theory) << ',' << row.theory_status << '\n';
    }
  }
}

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::mackenthun: return "mackenthun";
    case EstimatorKind::pilot_only: return "pilot";
    case EstimatorKind::viterbi_viterbi: return "vv";
    case EstimatorKind::weighted: return "weighted";
  }
  return "mackenthun";
}

EstimatorKind estimator_kind_from_string(std::string_view name) {
  if (name == "mackenthun") return EstimatorKind::mackenthun;
  if (name == "pilot") return EstimatorKind::pilot_only;
  if (name == "vv") return EstimatorKind::viterbi_viterbi;
  if (name == "weighted") return EstimatorKind::weighted;
  throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::ring: return "ring";
    case NoiseKind::none: return "none";
  }
  return "gaussian";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "ring") return NoiseKind::ring;
  if (name == "none") return NoiseKind::none;
  throw std::invalid_argument("unknown noise model '" + std::string(name) + "'");
}

std::string_view to_string(PilotLayout layout) {
  return layout == PilotLayout::prefix ? "prefix" : "spread";
}

PilotLayout pilot_layout_from_string(std::string_view name) {
  if (name == "prefix") return PilotLayout::prefix;
  if (name == "spread") return PilotLayout::spread;
  throw std::invalid_argument("unknown pilot layout '" + std::string(name) + "'");
}

nlohmann::json to_json(const SweepConfig& c) {
  return {
      {"M", c.M},
      {"L", c.L},
      {"pilots", c.pilot_count},
      {"layout", to_string(c.layout)},
      {"snr_db", c.snr_grid_db},
      {"trials", c.trials},
      {"rho0", c.rho0},
      {"master_seed", c.master_seed},
      {"estimator", to_string(c.estimator.kind)},
      {"beta", c.estimator.beta},
      {"noise", to_string(c.noise)},
      {"theory_mc_samples", c.theory_mc_samples},
  };
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig c;
  c.M = j.at("M").get<int>();
  c.L = j.at("L").get<std::size_t>();
  c.pilot_count = j.at("pilots").get<std::size_t>();
  c.layout = pilot_layout_from_string(j.at("layout").get<std::string>());
  c.snr_grid_db = j.at("snr_db").get<std::vector<double>>();
  c.trials = j.at("trials").get<std::size_t>();
  c.rho0 = j.at("rho0").get<double>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.estimator.kind = estimator_kind_from_string(j.at("estimator").get<std::string>());
  c.estimator.beta = j.at("beta").get<double>();
  c.noise = noise_kind_from_string(j.at("noise").get<std::string>());
  c.theory_mc_samples = j.value("theory_mc_samples", c.theory_mc_samples);
  return c;
}

}  // namespace pilotsync
