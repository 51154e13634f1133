#include <doctest.h>

#include <array>
#include <chrono>
#include <cmath>
#include <memory>

#include "pilotsync/angles.hpp"
#include "pilotsync/estimators.hpp"

using namespace pilotsync;

namespace {

struct Instance {
  std::shared_ptr<const FramePlan> plan;
  std::vector<cplx> symbols;
  ReceivedFrame frame;
};

Instance make_instance(std::size_t L, std::size_t P, int M, ChannelParams params, double sigma, Rng& rng) {
  auto plan = std::make_shared<const FramePlan>(FramePlan::make(L, P, M));
  auto symbols = random_frame(*plan, Constellation(M), rng);
  const GaussianNoise gauss(sigma > 0.0 ? sigma : 1.0);
  const NullNoise none;
  const NoiseModel& noise = sigma > 0.0 ? static_cast<const NoiseModel&>(gauss) : none;
  auto frame = apply_channel(plan, symbols, params, noise, rng);
  return {plan, std::move(symbols), std::move(frame)};
}

ReceivedFrame frame_from(std::vector<cplx> samples, std::size_t pilots, int M) {
  auto plan = std::make_shared<const FramePlan>(FramePlan::make(samples.size(), pilots, M));
  return ReceivedFrame(plan, std::move(samples));
}

std::vector<cplx> rotate(std::span<const cplx> v, cplx factor) {
  std::vector<cplx> out(v.begin(), v.end());
  for (auto& x : out) x *= factor;
  return out;
}

}  // namespace

TEST_CASE("hard decisions") {
  CHECK(hard_decision(cplx(1.0, 0.1), 0.0, 4) == cplx(1.0, 0.0));
  CHECK(hard_decision(std::polar(1.0, pi / 2), 0.0, 2) == cplx(-1.0, 0.0));
  CHECK(hard_decision_index(0.0, 0.3, 8) == 0);

  // Exhaustive argmin over the constellation, for several rho.
  Rng rng(1);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(-pi, pi);
  for (int M : {2, 4, 8}) {
    const Constellation c(M);
    for (int n = 0; n < 500; ++n) {
      const cplx y(N(rng), N(rng));
      const double theta = U(rng);
      const cplx chosen = hard_decision(y, theta, M);
      for (double rho : {0.1, 1.0, 7.0}) {
        const double best = std::norm(y - std::polar(rho, theta) * chosen);
        for (auto s : c.points()) CHECK(best <= std::norm(y - std::polar(rho, theta) * s) + 1e-12);
      }
    }
  }
}

TEST_CASE("zero noise recovers a0") {
  Rng rng(2);
  for (int M : {2, 4, 8}) {
    auto inst = make_instance(64, 3, M, {1.7, 2.9}, 0.0, rng);
    const auto r = mackenthun(inst.frame, M);
    CHECK(std::abs(r.amplitude.value() - std::polar(1.7, 2.9)) < 1e-12);
    REQUIRE(r.data_decisions);
    const auto data = inst.plan->data_positions();
    for (std::size_t n = 0; n < data.size(); ++n) CHECK(std::abs((*r.data_decisions)[n] - inst.symbols[data[n]]) < 1e-12);
    CHECK(std::abs(naive_enumeration(inst.frame, M).report.amplitude.value() - std::polar(1.7, 2.9)) < 1e-12);
    CHECK(std::abs(pilot_only(inst.frame).value() - std::polar(1.7, 2.9)) < 1e-12);
  }
  auto ones = frame_from(std::vector<cplx>(5, 1.0), 5, 4);
  CHECK(std::abs(pilot_only(ones).value() - 1.0) < 1e-15);
}

TEST_CASE("no data reduces to the pilot correlation") {
  Rng rng(3);
  auto inst = make_instance(7, 7, 4, {0.9, -1.0}, 0.4, rng);
  const auto fast = mackenthun(inst.frame, 4);
  const auto brute = brute_force(inst.frame, 4);
  const auto pilot = pilot_only(inst.frame);
  CHECK(std::abs(fast.amplitude.value() - pilot.value()) < 1e-14);
  CHECK(std::abs(brute.amplitude.value() - pilot.value()) < 1e-14);
}

TEST_CASE("fast, naive and exhaustive search agree") {
  Rng rng(4);
  for (int n = 0; n < 150; ++n) {
    const int M = std::array{2, 4, 8}[n % 3];
    const std::size_t nd = 1 + n % 6;
    const std::size_t np = n % 5;
    if (M == 8 && nd > 5) continue;
    auto inst = make_instance(nd + np, np, M, {1.0, 0.4 * n}, 0.5, rng);
    const auto fast = mackenthun_trace(inst.frame, M);
    const auto naive = naive_enumeration(inst.frame, M);
    const auto brute = brute_force(inst.frame, M);
    CHECK(fast.report.objective == doctest::Approx(brute.objective).epsilon(1e-9));
    REQUIRE(fast.objectives.size() == naive.objectives.size());
    for (std::size_t k = 0; k < fast.objectives.size(); ++k) {
      CHECK(fast.objectives[k] == doctest::Approx(naive.objectives[k]).epsilon(1e-9));
    }
    // Index M|D| repeats index 0; without pilots indices |D| apart are rotations.
    const std::size_t period = np > 0 ? static_cast<std::size_t>(M) * nd : nd;
    CHECK(fast.report.candidate_index % period == naive.report.candidate_index % period);
    if (np > 0) CHECK(std::abs(fast.report.amplitude.value() - brute.amplitude.value()) < 1e-7);
  }
}

TEST_CASE("sum of squares identity and local optimality") {
  Rng rng(5);
  for (int n = 0; n < 40; ++n) {
    const int M = n % 2 ? 4 : 8;
    auto inst = make_instance(40, 5, M, {1.0, 0.1 * n}, 0.6, rng);
    const auto r = mackenthun(inst.frame, M);
    double energy = 0.0;
    for (auto y : inst.frame.samples()) energy += std::norm(y);
    const double ss = sum_of_squares(inst.frame, r.amplitude.value(), *r.data_decisions);
    CHECK(ss == doctest::Approx(energy - r.objective).epsilon(1e-10));

    // Decisions are the hard decisions at theta_hat.
    const auto data = inst.plan->data_positions();
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(std::abs((*r.data_decisions)[i] - hard_decision(inst.frame[data[i]], r.amplitude.theta, M)) < 1e-12);
    }
    // Perturbing a or one decision does not decrease SS.
    for (cplx da : {cplx(1e-3, 0.0), cplx(0.0, 1e-3), cplx(-1e-3, 0.0), cplx(0.0, -1e-3)}) {
      CHECK(sum_of_squares(inst.frame, r.amplitude.value() + da, *r.data_decisions) >= ss - 1e-12);
    }
    auto alt = *r.data_decisions;
    alt[n % alt.size()] *= std::polar(1.0, two_pi / M);
    CHECK(sum_of_squares(inst.frame, r.amplitude.value(), alt) >= ss - 1e-12);
  }
}

TEST_CASE("equivariance under scaling and rotation") {
  Rng rng(6);
  for (int n = 0; n < 30; ++n) {
    const int M = 4;
    auto inst = make_instance(50, 6, M, {1.0, 0.2}, 0.5, rng);
    const auto base = mackenthun(inst.frame, M);

    const auto scaled = mackenthun(ReceivedFrame(inst.plan, rotate(inst.frame.samples(), 3.0)), M);
    CHECK(scaled.amplitude.rho == doctest::Approx(3.0 * base.amplitude.rho).epsilon(1e-12));
    CHECK(scaled.amplitude.theta == doctest::Approx(base.amplitude.theta).epsilon(1e-12));

    const double phi = 0.37;
    const auto turned = mackenthun(ReceivedFrame(inst.plan, rotate(inst.frame.samples(), std::polar(1.0, phi))), M);
    CHECK(std::abs(wrap_pi(turned.amplitude.theta - base.amplitude.theta - phi)) < 1e-10);
  }
}

TEST_CASE("without pilots the estimate is defined up to the symmetry class") {
  Rng rng(7);
  const int M = 4;
  auto inst = make_instance(8, 0, M, {1.0, 0.3}, 0.3, rng);
  const auto r = mackenthun(inst.frame, M);
  const auto brute = brute_force(inst.frame, M);
  CHECK(r.objective == doctest::Approx(brute.objective).epsilon(1e-9));
  CHECK(r.amplitude.rho == doctest::Approx(brute.amplitude.rho).epsilon(1e-9));
  CHECK(std::abs(wrap_frac(r.amplitude.theta - brute.amplitude.theta, M)) < 1e-9);
  const auto shifted = mackenthun(ReceivedFrame(inst.plan, rotate(inst.frame.samples(), std::polar(1.0, two_pi / M))), M);
  CHECK(shifted.objective == doctest::Approx(r.objective).epsilon(1e-12));
}

TEST_CASE("weighted objective") {
  Rng rng(8);
  for (int n = 0; n < 60; ++n) {
    const int M = n % 2 ? 2 : 4;
    auto inst = make_instance(2 + n % 5, 1 + n % 2, M, {1.0, 0.5 * n}, 0.7, rng);
    const auto unit = mackenthun(inst.frame, M, 1.0);
    const auto plain = mackenthun(inst.frame, M);
    CHECK(unit.amplitude.rho == plain.amplitude.rho);
    CHECK(unit.amplitude.theta == plain.amplitude.theta);
    CHECK(unit.candidate_index == plain.candidate_index);
    const auto w = mackenthun(inst.frame, M, 0.25);
    const auto wb = brute_force(inst.frame, M, 0.25);
    CHECK(w.objective == doctest::Approx(wb.objective).epsilon(1e-9));
    CHECK(std::abs(w.amplitude.value() - wb.amplitude.value()) < 1e-7);
  }
  Rng r2(9);
  auto inst = make_instance(8, 2, 4, {}, 0.1, r2);
  CHECK_THROWS_AS(mackenthun(inst.frame, 4, 0.0), std::domain_error);
}

TEST_CASE("input validation") {
  Rng rng(10);
  auto inst = make_instance(8, 2, 4, {}, 0.1, rng);
  CHECK_THROWS_AS(mackenthun(inst.frame, 8), std::invalid_argument);
  auto empty = std::make_shared<const FramePlan>(0, std::vector<std::size_t>{}, std::vector<cplx>{}, 4);
  CHECK_THROWS_AS(mackenthun(ReceivedFrame(empty, {}), 4), std::domain_error);
  auto no_pilots = make_instance(8, 0, 4, {}, 0.1, rng);
  CHECK_THROWS_AS(pilot_only(no_pilots.frame), std::domain_error);
  auto large = make_instance(20, 0, 4, {}, 0.1, rng);
  CHECK_THROWS_AS(brute_force(large.frame, 4), std::length_error);
}

TEST_CASE("running time grows like L log L") {
  Rng rng(11);
  auto time_for = [&](std::size_t L) {
    auto inst = make_instance(L, L / 8, 4, {}, 0.5, rng);
    double best = 1e9;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int k = 0; k < 4; ++k) (void)mackenthun(inst.frame, 4);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double t1 = time_for(1 << 15);
  const double t2 = time_for(1 << 16);
  CHECK(t2 / t1 <= 2.6);
}

TEST_CASE("pilot-only variance") {
  Rng rng(12);
  const double sigma = 0.5;
  const std::size_t L = 64;
  const int T = 4000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int t = 0; t < T; ++t) {
    auto inst = make_instance(L, L, 4, {1.0, 0.0}, sigma, rng);
    const double e = std::norm(pilot_only(inst.frame).value() - 1.0);
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / T;
  const double se = std::sqrt((sum_sq / T - mean * mean) / T);
  CHECK(std::abs(mean - 2.0 * sigma * sigma / L) <= 4.0 * se);
}

TEST_CASE("Viterbi-Viterbi") {
  Rng rng(13);
  for (int M : {2, 4, 8}) {
    const double theta0 = 0.6 * pi / M;
    auto inst = make_instance(32, 0, M, {1.0, theta0}, 0.0, rng);
    for (auto F : {VvWeighting::unit, VvWeighting::linear, VvWeighting::power_m}) {
      CHECK(viterbi_viterbi(inst.frame, M, F) == doctest::Approx(theta0).epsilon(1e-12));
    }
    CHECK(viterbi_viterbi(frame_from({std::polar(1.0, theta0 + two_pi / M)}, 0, M), M) ==
          doctest::Approx(viterbi_viterbi(frame_from({std::polar(1.0, theta0)}, 0, M), M)).epsilon(1e-12));
  }
  CHECK(viterbi_viterbi(frame_from({0.0, std::polar(1.0, 0.1)}, 0, 4), 4) == doctest::Approx(0.1));
}
