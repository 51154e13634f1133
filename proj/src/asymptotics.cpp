#include "pilotsync/asymptotics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pilotsync/angles.hpp"

namespace pilotsync {

namespace {

constexpr int max_depth = 24;
constexpr double rel_tol = 1e-13;
constexpr double abs_floor = 1e-15;

// Adaptive bisection on single Gauss-Kronrod panels. A panel is accepted when
// its error estimate meets the relative tolerance or its share of an absolute
// floor; the latter stops refinement where the integrand is pure roundoff.
double gk_adaptive(const std::function<double(double)>& f, double a, double b, double floor, int depth,
                   double* error) {
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &err);
  // Boost reports the single-panel error on the reference interval [-1, 1].
  err *= 0.5 * (b - a);
  if (err <= std::max(rel_tol * std::abs(value), floor) || depth >= max_depth) {
    *error = err;
    return value;
  }
  const double mid = 0.5 * (a + b);
  double e1 = 0.0;
  double e2 = 0.0;
  const double v = gk_adaptive(f, a, mid, 0.5 * floor, depth + 1, &e1) + gk_adaptive(f, mid, b, 0.5 * floor, depth + 1, &e2);
  *error = e1 + e2;
  return v;
}

double gk(const std::function<double(double)>& f, double a, double b, double* error) {
  double err = 0.0;
  const double value = gk_adaptive(f, a, b, abs_floor, 0, &err);
  if (error) *error = err;
  return value;
}

// Integral over consecutive breakpoints; `points` must be ascending.
double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& points,
                        double* error) {
  double total = 0.0;
  double err_total = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i + 1] <= points[i]) continue;
    double err = 0.0;
    total += gk(f, points[i], points[i + 1], &err);
    err_total += err;
  }
  if (error) *error = err_total;
  return total;
}

void require_kappa(double kappa, const char* where) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw std::domain_error(std::string(where) + ": kappa must be positive and finite");
  }
}

// Breakpoints covering one period whose cell edges are congruent to `phase`
// modulo 2 pi / M. The window is centred on zero so that the peak of g sits
// well inside it, where phi carries full relative precision.
std::vector<double> period_breakpoints(double phase, int M) {
  const double step = two_pi / M;
  const double start = phase - step * round_half_up((phase + pi) / step);
  std::vector<double> points;
  for (int k = 0; k <= M; ++k) points.push_back(start + step * k);
  points.push_back(0.0);
  std::sort(points.begin(), points.end());
  return points;
}

double check_tolerance(double value, double error, double abs_tol, const char* what) {
  if (!(error <= std::max(abs_tol, 1e-12 * std::abs(value)))) {
    throw QuadratureError(std::string(what) + ": integral did not converge", error);
  }
  return value;
}

// int_0^inf r^3 exp(-kappa (r - c)^2) dr, by expanding r = u + c and
// integrating u^n exp(-kappa u^2) over [-c, inf) term by term.
double radial_third_moment(double c, double kappa) {
  const double e = std::exp(-kappa * c * c) / (2.0 * kappa);
  const double i0 = std::sqrt(pi / kappa) * normal_cdf(c * std::sqrt(2.0 * kappa));
  const double i1 = e;
  const double i2 = -c * e + i0 / (2.0 * kappa);
  const double i3 = c * c * e + e / kappa;
  return i3 + 3.0 * c * i2 + 3.0 * c * c * i1 + c * c * c * i0;
}

double second_moment_weight(SecondMoment which, double phi, int M) {
  switch (which) {
    case SecondMoment::sin2: { const double s = std::sin(phi); return s * s; }
    case SecondMoment::cos2: { const double c = std::cos(phi); return c * c; }
    case SecondMoment::sin2_wrapped: { const double s = std::sin(wrap_frac(phi, M)); return s * s; }
    case SecondMoment::cos2_wrapped: { const double c = std::cos(wrap_frac(phi, M)); return c * c; }
  }
  return 0.0;
}

}  // namespace

TheoryInput TheoryInput::from_counts(int M, std::size_t L, std::size_t pilots, double kappa, double rho0) {
  if (L == 0 || pilots > L) throw std::invalid_argument("TheoryInput: need 0 <= |P| <= L, L >= 1");
  TheoryInput in;
  in.M = M;
  in.p = static_cast<double>(pilots) / static_cast<double>(L);
  in.d = static_cast<double>(L - pilots) / static_cast<double>(L);
  in.kappa = kappa;
  in.rho0 = rho0;
  return in;
}

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 double* error) {
  double err = 0.0;
  const double value = gk(f, a, b, &err);
  if (error) *error = err;
  return check_tolerance(value, err, abs_tol, "integrate");
}

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

double gaussian_g(double phi, double kappa) {
  require_kappa(kappa, "gaussian_g");
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  const double lead = c / two_pi * std::exp(-kappa);
  const double tail = normal_cdf(std::sqrt(2.0 * kappa) * c) / std::sqrt(pi * kappa);
  // Cancellation for cos(phi) < 0 can leave a tiny negative value.
  return std::max(0.0, lead + tail * std::exp(-kappa * s * s) * (0.5 + kappa * c * c));
}

double gaussian_joint_pdf(double r, double phi, double kappa) {
  require_kappa(kappa, "gaussian_joint_pdf");
  if (r < 0.0) throw std::domain_error("gaussian_joint_pdf: r must be nonnegative");
  return kappa * r / pi * std::exp(-kappa * (r * r - 2.0 * r * std::cos(phi) + 1.0));
}

double gaussian_h1(double x, double kappa) {
  require_kappa(kappa, "gaussian_h1");
  double err = 0.0;
  const double value = integrate_pieces(
      [&](double phi) { return std::cos(x + phi) * gaussian_g(phi, kappa); },
      {-pi, -pi / 2.0, 0.0, pi / 2.0, pi}, &err);
  return check_tolerance(value, err, 1e-10, "gaussian_h1");
}

double gaussian_h2(double x, int M, double kappa) {
  require_kappa(kappa, "gaussian_h2");
  if (M < 2) throw std::domain_error("gaussian_h2: M must be >= 2");
  // Cells on which <x + phi> is smooth start at phi = pi/M - x.
  const auto points = period_breakpoints(pi / M - x, M);
  double err = 0.0;
  const double value = integrate_pieces(
      [&](double phi) { return std::cos(wrap_frac(x + phi, M)) * gaussian_g(phi, kappa); }, points,
      &err);
  return check_tolerance(value, err, 1e-10, "gaussian_h2");
}

double gaussian_mean_sin_wrapped(int M, double kappa) {
  require_kappa(kappa, "gaussian_mean_sin_wrapped");
  const auto points = period_breakpoints(pi / M - two_pi, M);
  double err = 0.0;
  const double value = integrate_pieces(
      [&](double phi) { return std::sin(wrap_frac(phi, M)) * gaussian_g(phi, kappa); }, points, &err);
  return check_tolerance(value, err, 1e-10, "gaussian_mean_sin_wrapped");
}

double gaussian_second_moment(SecondMoment which, int M, double kappa, double* error) {
  require_kappa(kappa, "gaussian_second_moment");
  if (M < 2) throw std::domain_error("gaussian_second_moment: M must be >= 2");
  auto outer = [&](double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double envelope = std::exp(-kappa * s * s);
    if (envelope == 0.0) return 0.0;
    return second_moment_weight(which, phi, M) * kappa / pi * envelope * radial_third_moment(c, kappa);
  };
  const auto points = period_breakpoints(pi / M - two_pi, M);
  double err = 0.0;
  const double value = integrate_pieces(outer, points, &err);
  if (error) *error = err;
  return check_tolerance(value, err, 1e-9, "gaussian_second_moment");
}

NoiseFigures constants_gaussian(int M, double kappa) {
  if (M < 2) throw std::domain_error("constants_gaussian: M must be >= 2");
  if (!(kappa >= kappa_floor * (1.0 - 1e-12)) || !std::isfinite(kappa)) {
    throw TheoryOutOfRange("constants_gaussian: kappa = " + std::to_string(kappa) +
                           " is below the supported floor " + std::to_string(kappa_floor));
  }
  NoiseFigures fig;
  fig.M = M;
  fig.h1_0 = gaussian_h1(0.0, kappa);
  fig.h2_0 = gaussian_h2(0.0, M, kappa);
  double boundary_sum = 0.0;
  for (int k = 0; k < M; ++k) {
    const double g = gaussian_g(two_pi * k / M + pi / M, kappa);
    fig.g_at_boundaries.push_back(g);
    boundary_sum += g;
  }
  fig.H = fig.h2_0 - 2.0 * std::sin(pi / M) * boundary_sum;
  fig.A1 = 1.0 / (2.0 * kappa);
  fig.B1 = 1.0 / (2.0 * kappa);
  double err_a = 0.0;
  double err_b = 0.0;
  fig.A2 = gaussian_second_moment(SecondMoment::sin2_wrapped, M, kappa, &err_a);
  fig.B2 = gaussian_second_moment(SecondMoment::cos2_wrapped, M, kappa, &err_b) - fig.h2_0 * fig.h2_0;
  fig.quadrature_error = std::max(err_a, err_b);
  return fig;
}

NoiseFigures constants_mc(const NoiseModel& noise, int M, double rho0, std::size_t samples,
                          std::uint64_t seed) {
  if (M < 2) throw std::domain_error("constants_mc: M must be >= 2");
  if (!(rho0 > 0.0)) throw std::domain_error("constants_mc: rho0 must be positive");
  if (samples < 10'000) throw std::invalid_argument("constants_mc: need at least 10^4 samples");

  constexpr std::size_t batches = 64;
  const double delta = std::min(0.01, pi / (8.0 * M));
  const std::size_t stats = 7 + static_cast<std::size_t>(M);
  // Per batch: n, then sums of Re v, R cos<Phi>, R^2 sin^2 Phi, R^2 sin^2 <Phi>,
  // R^2 cos^2 Phi, R^2 cos^2 <Phi>, R^2, and R * 1{Phi within delta of boundary k}.
  std::vector<std::vector<double>> sums(batches, std::vector<double>(stats, 0.0));
  std::vector<double> counts(batches, 0.0);

  std::vector<cplx> buffer(4096);
  for (std::size_t b = 0; b < batches; ++b) {
    std::size_t todo = samples / batches + (b < samples % batches ? 1 : 0);
    counts[b] = static_cast<double>(todo);
    Rng rng(derive_seed(seed, b, 0x6d63));
    auto& S = sums[b];
    while (todo > 0) {
      const std::size_t n = std::min(todo, buffer.size());
      noise.fill(std::span<cplx>(buffer.data(), n), rng);
      for (std::size_t i = 0; i < n; ++i) {
        const cplx v = 1.0 + buffer[i] / rho0;
        const double R = std::abs(v);
        const double phi = std::arg(v);
        const double wrapped = wrap_frac(phi, M);
        const double cw = std::cos(wrapped);
        const double sw = std::sin(wrapped);
        const double R2 = R * R;
        S[0] += v.real();
        S[1] += R * cw;
        S[2] += v.imag() * v.imag();
        S[3] += R2 * sw * sw;
        S[4] += v.real() * v.real();
        S[5] += R2 * cw * cw;
        S[6] += R2;
        const double offset = wrap_frac(phi - pi / M, M);
        if (std::abs(offset) < delta) {
          const auto k = ((grid_index(phi - pi / M, M) % M) + M) % M;
          S[7 + static_cast<std::size_t>(k)] += R;
        }
      }
      todo -= n;
    }
  }

  auto figures_from = [&](const std::vector<double>& S, double n) {
    NoiseFigures f;
    f.M = M;
    f.h1_0 = S[0] / n;
    f.h2_0 = S[1] / n;
    f.A1 = S[2] / n;
    f.A2 = S[3] / n;
    f.B1 = S[4] / n - 1.0;
    f.B2 = S[5] / n - f.h2_0 * f.h2_0;
    double boundary_sum = 0.0;
    for (int k = 0; k < M; ++k) {
      const double g = S[7 + static_cast<std::size_t>(k)] / (n * 2.0 * delta);
      f.g_at_boundaries.push_back(g);
      boundary_sum += g;
    }
    f.H = f.h2_0 - 2.0 * std::sin(pi / M) * boundary_sum;
    return f;
  };

  std::vector<double> total(stats, 0.0);
  double total_n = 0.0;
  std::vector<NoiseFigures> per_batch;
  std::vector<double> batch_r2;
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t s = 0; s < stats; ++s) total[s] += sums[b][s];
    total_n += counts[b];
    per_batch.push_back(figures_from(sums[b], counts[b]));
    batch_r2.push_back(sums[b][6] / counts[b]);
  }

  NoiseFigures fig = figures_from(total, total_n);
  fig.boundary_bin_halfwidth = delta;

  auto batch_se = [&](auto getter) {
    double mean = 0.0;
    for (const auto& f : per_batch) mean += getter(f);
    mean /= static_cast<double>(batches);
    double ss = 0.0;
    for (const auto& f : per_batch) ss += (getter(f) - mean) * (getter(f) - mean);
    return std::sqrt(ss / static_cast<double>(batches - 1)) / std::sqrt(static_cast<double>(batches));
  };
  FigureErrors se;
  se.h1_0 = batch_se([](const NoiseFigures& f) { return f.h1_0; });
  se.h2_0 = batch_se([](const NoiseFigures& f) { return f.h2_0; });
  se.H = batch_se([](const NoiseFigures& f) { return f.H; });
  se.A1 = batch_se([](const NoiseFigures& f) { return f.A1; });
  se.A2 = batch_se([](const NoiseFigures& f) { return f.A2; });
  se.B1 = batch_se([](const NoiseFigures& f) { return f.B1; });
  se.B2 = batch_se([](const NoiseFigures& f) { return f.B2; });
  for (int k = 0; k < M; ++k) {
    se.g_at_boundaries.push_back(batch_se([k](const NoiseFigures& f) {
      return f.g_at_boundaries[static_cast<std::size_t>(k)];
    }));
  }
  fig.standard_errors = std::move(se);

  // A finite second moment keeps batch means of R^2 comparable; a heavy tail
  // shows up as a few batches dominating.
  std::vector<double> sorted = batch_r2;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[batches / 2];
  const bool finite = std::all_of(batch_r2.begin(), batch_r2.end(), [](double v) { return std::isfinite(v); });
  fig.reliable = finite && std::isfinite(noise.second_moment()) && sorted.back() <= 20.0 * median;
  return fig;
}

CovariancePrediction predict(const NoiseFigures& figures, const TheoryInput& input, std::size_t L) {
  if (L == 0) throw std::invalid_argument("predict: L must be >= 1");
  if (input.p < 0.0 || input.d < 0.0 || std::abs(input.p + input.d - 1.0) > 1e-12) {
    throw std::invalid_argument("predict: need p, d >= 0 with p + d = 1");
  }
  const double denom = input.p + figures.H * input.d;
  if (!(denom > 0.0)) {
    throw TheoryOutOfRange("predict: p + H d = " + std::to_string(denom) +
                           " <= 0; the asymptotic covariance is undefined here");
  }
  const double n = static_cast<double>(L);
  CovariancePrediction out;
  out.L = L;
  out.phase_var = (input.p * figures.A1 + input.d * figures.A2) / (denom * denom * n);
  out.amp_var = input.rho0 * input.rho0 * (input.p * figures.B1 + input.d * figures.B2) / n;
  out.cross = 0.0;
  out.amp_mean = input.rho0 * figures.G0(input.p, input.d);
  return out;
}

}  // namespace pilotsync
