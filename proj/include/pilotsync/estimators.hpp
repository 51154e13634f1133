#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "pilotsync/signal_model.hpp"

namespace pilotsync {

/// Polar form of a complex amplitude, theta in [-pi, pi).
struct ComplexAmplitude {
  double rho = 0.0;
  double theta = 0.0;

  cplx value() const { return std::polar(rho, theta); }
  static ComplexAmplitude from_complex(cplx a);
};

struct EstimateReport {
  ComplexAmplitude amplitude;
  /// Decisions for the data positions, in plan.data_positions() order.
  std::optional<std::vector<cplx>> data_decisions;
  /// |Y|^2 / N at the optimum, N = |P| + beta*|D| (N = L when unweighted).
  double objective = 0.0;
  /// Index k of the winning candidate sequence f_k; 0 is the theta = 0 sequence.
  std::size_t candidate_index = 0;
  /// Set when |Y| == 0 and the phase is undefined.
  bool degenerate = false;
};

/// Report plus the objective of every candidate f_0 .. f_{M|D|} in visiting order.
struct CandidateTrace {
  EstimateReport report;
  std::vector<double> objectives;
};

/// Largest M^|D| that brute_force will enumerate.
inline constexpr std::uint64_t brute_force_limit = 10'000'000;

/// Index k in [0, M) of the constellation point nearest exp(-j*theta) * y.
/// y == 0 yields 0.
int hard_decision_index(cplx y, double theta, int M);

/// Constellation point d minimizing |y - rho*exp(j*theta)*d|^2 for every rho > 0.
cplx hard_decision(cplx y, double theta, int M);

/// Least-squares joint estimate of a0 and the data symbols by sweeping the
/// at most M|D| candidate decision sequences in O(L log L).
///
/// With beta != 1 the data terms of the sum of squares are weighted by beta
/// and the amplitude is normalized by |P| + beta*|D|.
///
/// Throws std::domain_error for an empty frame or beta <= 0, and
/// std::invalid_argument when M differs from the plan's order.
EstimateReport mackenthun(const ReceivedFrame& frame, int M, double beta = 1.0);

/// As mackenthun, also recording the recursively updated objective of each candidate.
CandidateTrace mackenthun_trace(const ReceivedFrame& frame, int M, double beta = 1.0);

/// Same candidate walk as mackenthun, recomputing every objective from scratch (O(L^2)).
CandidateTrace naive_enumeration(const ReceivedFrame& frame, int M);

/// Exhaustive minimization of the (weighted) sum of squares over all M^|D|
/// data assignments. Throws std::length_error past brute_force_limit.
EstimateReport brute_force(const ReceivedFrame& frame, int M, double beta = 1.0);

/// (1/|P|) * sum over pilots of y_i * conj(p_i). Throws std::domain_error if P is empty.
ComplexAmplitude pilot_only(const ReceivedFrame& frame);

enum class VvWeighting {
  unit,     ///< F(x) = 1
  linear,   ///< F(x) = x
  power_m,  ///< F(x) = x^M
};

/// Noncoherent M-th power phase estimate in [-pi/M, pi/M). Pilot knowledge
/// is not used. Samples equal to zero are skipped.
double viterbi_viterbi(const ReceivedFrame& frame, int M, VvWeighting F = VvWeighting::unit);

/// Sum of squares sum_P |y - a p|^2 + beta * sum_D |y - a d|^2.
double sum_of_squares(const ReceivedFrame& frame, cplx a, const std::vector<cplx>& data_decisions,
                      double beta = 1.0);

}  // namespace pilotsync
