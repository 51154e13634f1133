#include "pilotsync/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pilotsync/angles.hpp"

namespace pilotsync {

namespace {

void check_frame(const ReceivedFrame& frame, int M, const char* where) {
  if (M != frame.plan().order()) {
    throw std::invalid_argument(std::string(where) + ": M=" + std::to_string(M) +
                                " does not match the frame plan (M=" +
                                std::to_string(frame.plan().order()) + ")");
  }
  if (frame.plan().length() == 0) {
    throw std::domain_error(std::string(where) + ": empty frame");
  }
}

cplx pilot_correlation(const ReceivedFrame& frame) {
  const auto& plan = frame.plan();
  const auto positions = plan.pilot_positions();
  const auto values = plan.pilot_symbols();
  cplx B{0.0, 0.0};
  for (std::size_t n = 0; n < positions.size(); ++n) B += frame[positions[n]] * std::conj(values[n]);
  return B;
}

EstimateReport finish(cplx Y, double normalizer, double objective, std::size_t k) {
  EstimateReport report;
  report.objective = objective;
  report.candidate_index = k;
  if (std::abs(Y) == 0.0) {
    report.degenerate = true;
    report.amplitude = {0.0, 0.0};
  } else {
    report.amplitude = ComplexAmplitude::from_complex(Y / normalizer);
  }
  return report;
}

CandidateTrace run_mackenthun(const ReceivedFrame& frame, int M, double beta, bool keep_trace) {
  check_frame(frame, M, "mackenthun");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::domain_error("mackenthun: beta must be positive and finite");
  }
  const auto& plan = frame.plan();
  const Constellation constellation(M);
  const auto data = plan.data_positions();
  const std::size_t nd = data.size();

  std::vector<double> z(nd);
  std::vector<cplx> g(nd);
  std::vector<std::int64_t> base(nd);  // grid index of b_i = d_i(0)
  for (std::size_t n = 0; n < nd; ++n) {
    const cplx y = frame[data[n]];
    const double phi = std::arg(y);
    const auto k = grid_index(phi, M);
    base[n] = k;
    z[n] = phi - static_cast<double>(k) * constellation.step();
    g[n] = beta * y * std::conj(constellation.symbol(k));
  }

  cplx Y = pilot_correlation(frame);
  for (const auto& gi : g) Y += gi;
  const double normalizer = static_cast<double>(plan.pilot_count()) + beta * static_cast<double>(nd);

  cplx best_Y = Y;
  double best_Q = std::norm(Y) / normalizer;
  std::size_t best_k = 0;

  CandidateTrace out;
  if (keep_trace) {
    out.objectives.reserve(static_cast<std::size_t>(M) * nd + 1);
    out.objectives.push_back(best_Q);
  }

  const cplx eta = constellation.symbol(1) - 1.0;
  const cplx rotate = eta + 1.0;

  std::vector<std::size_t> order(nd);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

  const std::size_t steps = static_cast<std::size_t>(M) * nd;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t idx = order[k % nd];
    Y += eta * g[idx];
    g[idx] = rotate * g[idx];
    const double Q = std::norm(Y) / normalizer;
    if (keep_trace) out.objectives.push_back(Q);
    if (Q > best_Q) {
      best_Q = Q;
      best_Y = Y;
      best_k = k + 1;
    }
  }

  out.report = finish(best_Y, normalizer, best_Q, best_k);

  // f_k: the element at sorted rank r has been rotated by exp(-j*2*pi/M)
  // once per full pass plus once more if r < k mod |D|.
  std::vector<cplx> decisions(nd);
  if (nd > 0) {
    const std::size_t passes = best_k / nd;
    const std::size_t partial = best_k % nd;
    for (std::size_t r = 0; r < nd; ++r) {
      const std::size_t n = order[r];
      const auto turns = static_cast<std::int64_t>(passes + (r < partial ? 1 : 0));
      decisions[n] = constellation.symbol(base[n] - turns);
    }
  }
  out.report.data_decisions = std::move(decisions);
  return out;
}

}  // namespace

ComplexAmplitude ComplexAmplitude::from_complex(cplx a) {
  return {std::abs(a), wrap_pi(std::arg(a))};
}

int hard_decision_index(cplx y, double theta, int M) {
  if (M < 2) throw std::domain_error("hard_decision: M must be >= 2");
  if (y == cplx{0.0, 0.0}) return 0;
  const auto k = grid_index(std::arg(y * std::polar(1.0, -theta)), M);
  return static_cast<int>(((k % M) + M) % M);
}

cplx hard_decision(cplx y, double theta, int M) {
  return Constellation(M).symbol(hard_decision_index(y, theta, M));
}

EstimateReport mackenthun(const ReceivedFrame& frame, int M, double beta) {
  return run_mackenthun(frame, M, beta, false).report;
}

CandidateTrace mackenthun_trace(const ReceivedFrame& frame, int M, double beta) {
  return run_mackenthun(frame, M, beta, true);
}

CandidateTrace naive_enumeration(const ReceivedFrame& frame, int M) {
  check_frame(frame, M, "naive_enumeration");
  const auto& plan = frame.plan();
  const auto data = plan.data_positions();
  const std::size_t nd = data.size();
  const double L = static_cast<double>(plan.length());

  // f_0 = hard decisions at theta = 0; z_i = residual phase to that decision.
  std::vector<cplx> f(nd);
  std::vector<double> z(nd);
  for (std::size_t n = 0; n < nd; ++n) {
    const cplx y = frame[data[n]];
    f[n] = hard_decision(y, 0.0, M);
    z[n] = std::arg(y) - round_to_grid(std::arg(y), M);
  }
  std::vector<std::size_t> sigma(nd);
  for (std::size_t n = 0; n < nd; ++n) sigma[n] = n;
  std::stable_sort(sigma.begin(), sigma.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

  const cplx step_down = std::polar(1.0, -two_pi / M);
  auto objective_of = [&](const std::vector<cplx>& seq) {
    cplx Y{0.0, 0.0};
    const auto positions = plan.pilot_positions();
    const auto values = plan.pilot_symbols();
    for (std::size_t n = 0; n < positions.size(); ++n) Y += frame[positions[n]] * std::conj(values[n]);
    for (std::size_t n = 0; n < nd; ++n) Y += frame[data[n]] * std::conj(seq[n]);
    return Y;
  };

  CandidateTrace out;
  cplx Y = objective_of(f);
  cplx best_Y = Y;
  double best_Q = std::norm(Y) / L;
  std::size_t best_k = 0;
  std::vector<cplx> best_f = f;
  out.objectives.push_back(best_Q);

  const std::size_t steps = static_cast<std::size_t>(M) * nd;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t i = sigma[k % nd];
    f[i] *= step_down;
    Y = objective_of(f);
    const double Q = std::norm(Y) / L;
    out.objectives.push_back(Q);
    if (Q > best_Q) {
      best_Q = Q;
      best_Y = Y;
      best_k = k + 1;
      best_f = f;
    }
  }
  out.report = finish(best_Y, L, best_Q, best_k);
  // Snap accumulated rotations back onto the constellation.
  for (auto& d : best_f) d = hard_decision(d, 0.0, M);
  out.report.data_decisions = std::move(best_f);
  return out;
}

EstimateReport brute_force(const ReceivedFrame& frame, int M, double beta) {
  check_frame(frame, M, "brute_force");
  if (!(beta > 0.0)) throw std::domain_error("brute_force: beta must be positive");
  const auto& plan = frame.plan();
  const auto data = plan.data_positions();
  const std::size_t nd = data.size();

  std::uint64_t count = 1;
  for (std::size_t n = 0; n < nd; ++n) {
    count *= static_cast<std::uint64_t>(M);
    if (count > brute_force_limit) {
      throw std::length_error("brute_force: M^|D| = " + std::to_string(M) + "^" +
                              std::to_string(nd) + " exceeds the enumeration limit of " +
                              std::to_string(brute_force_limit));
    }
  }

  const Constellation constellation(M);
  const cplx B = pilot_correlation(frame);
  const double normalizer = static_cast<double>(plan.pilot_count()) + beta * static_cast<double>(nd);

  std::vector<int> digits(nd, 0);
  std::vector<int> best_digits = digits;
  cplx best_Y{0.0, 0.0};
  double best_Q = -1.0;
  for (std::uint64_t c = 0; c < count; ++c) {
    cplx D{0.0, 0.0};
    for (std::size_t n = 0; n < nd; ++n) D += frame[data[n]] * std::conj(constellation.symbol(digits[n]));
    const cplx Y = B + beta * D;
    const double Q = std::norm(Y) / normalizer;
    if (Q > best_Q) {
      best_Q = Q;
      best_Y = Y;
      best_digits = digits;
    }
    for (std::size_t n = 0; n < nd; ++n) {
      if (++digits[n] < M) break;
      digits[n] = 0;
    }
  }

  auto report = finish(best_Y, normalizer, best_Q, 0);
  std::vector<cplx> decisions(nd);
  for (std::size_t n = 0; n < nd; ++n) decisions[n] = constellation.symbol(best_digits[n]);
  report.data_decisions = std::move(decisions);
  return report;
}

ComplexAmplitude pilot_only(const ReceivedFrame& frame) {
  const auto count = frame.plan().pilot_count();
  if (count == 0) throw std::domain_error("pilot_only: frame has no pilot symbols");
  return ComplexAmplitude::from_complex(pilot_correlation(frame) / static_cast<double>(count));
}

double viterbi_viterbi(const ReceivedFrame& frame, int M, VvWeighting F) {
  check_frame(frame, M, "viterbi_viterbi");
  cplx A{0.0, 0.0};
  for (const cplx y : frame.samples()) {
    const double magnitude = std::abs(y);
    if (magnitude == 0.0) continue;
    double weight = 1.0;
    switch (F) {
      case VvWeighting::unit: break;
      case VvWeighting::linear: weight = magnitude; break;
      case VvWeighting::power_m: weight = std::pow(magnitude, M); break;
    }
    A += weight * std::polar(1.0, M * std::arg(y));
  }
  A /= static_cast<double>(frame.plan().length());
  return wrap_frac(std::arg(A) / M, M);
}

double sum_of_squares(const ReceivedFrame& frame, cplx a, const std::vector<cplx>& data_decisions,
                      double beta) {
  const auto& plan = frame.plan();
  const auto data = plan.data_positions();
  if (data_decisions.size() != data.size()) {
    throw std::invalid_argument("sum_of_squares: decision count does not match |D|");
  }
  const auto positions = plan.pilot_positions();
  const auto values = plan.pilot_symbols();
  double pilot_part = 0.0;
  for (std::size_t n = 0; n < positions.size(); ++n) pilot_part += std::norm(frame[positions[n]] - a * values[n]);
  double data_part = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) data_part += std::norm(frame[data[n]] - a * data_decisions[n]);
  return pilot_part + beta * data_part;
}

}  // namespace pilotsync
