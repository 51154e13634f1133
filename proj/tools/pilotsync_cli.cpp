// pilotsync: simulate, evaluate theory curves, estimate from sample files,
// and run the self-test suite.
//
// Exit codes: 0 success, 1 usage error, 2 runtime/numerical error, 3 self-test failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pilotsync/angles.hpp"
#include "pilotsync/asymptotics.hpp"
#include "pilotsync/estimators.hpp"
#include "pilotsync/io.hpp"
#include "pilotsync/montecarlo.hpp"
#include "pilotsync/selftest.hpp"

namespace {

using namespace pilotsync;
using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_runtime = 2;
constexpr int exit_selftest = 3;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes to `path`, or standard output for "-".
class Output {
 public:
  explicit Output(const std::string& path) : path_(path) {
    if (path_ != "-") {
      file_.open(path_, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot open '" + path_ + "' for writing");
    }
  }
  std::ostream& stream() { return path_ == "-" ? std::cout : file_; }
  bool is_file() const { return path_ != "-"; }

 private:
  std::string path_;
  std::ofstream file_;
};

void write_manifest(const std::string& out_path, json manifest) {
  manifest["version"] = PILOTSYNC_VERSION;
  manifest["timestamp"] = utc_timestamp();
  manifest["outputs"] = {out_path};
  std::ofstream file(out_path + ".manifest.json");
  if (!file) throw std::runtime_error("cannot write manifest for '" + out_path + "'");
  file << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  int M = 4;
  std::size_t L = 4096;
  std::size_t pilots = 0;
  std::string snr = "-20:1:20";
  long long trials = 5000;
  std::uint64_t seed = 1;
  std::vector<std::string> estimators{"mackenthun"};
  double beta = 1.0;
  std::string noise = "gaussian";
  std::string layout = "prefix";
  double rho0 = 1.0;
  std::size_t theory_samples = 1'000'000;
  std::string out = "-";
  unsigned threads = 0;
  std::string manifest;
};

int cmd_simulate(const SimulateArgs& a) {
  std::vector<SweepConfig> configs;
  if (!a.manifest.empty()) {
    std::ifstream in(a.manifest);
    if (!in) throw UsageError("cannot read manifest '" + a.manifest + "'");
    const auto j = json::parse(in);
    for (const auto& c : j.at("configs")) configs.push_back(sweep_config_from_json(c));
  } else {
    if (a.trials < 1) throw UsageError("--trials must be >= 1");
    if (a.pilots > a.L) throw UsageError("--pilots must not exceed --L");
    SweepConfig base;
    base.M = a.M;
    base.L = a.L;
    base.pilot_count = a.pilots;
    base.layout = pilot_layout_from_string(a.layout);
    base.snr_grid_db = parse_snr_grid(a.snr);
    base.trials = static_cast<std::size_t>(a.trials);
    base.rho0 = a.rho0;
    base.master_seed = a.seed;
    base.noise = noise_kind_from_string(a.noise);
    base.theory_mc_samples = a.theory_samples;
    for (const auto& name : a.estimators) {
      SweepConfig c = base;
      c.estimator.kind = estimator_kind_from_string(name);
      c.estimator.beta = c.estimator.kind == EstimatorKind::weighted ? a.beta : 1.0;
      try {
        c.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      configs.push_back(c);
    }
  }

  std::vector<SweepResult> results;
  for (auto c : configs) {
    c.threads = a.threads;
    results.push_back(run_sweep(c));
    for (const auto& w : results.back().warnings) std::cerr << "warning: " << w << '\n';
  }

  Output out(a.out);
  write_sweep_csv(out.stream(), results);
  if (out.is_file()) {
    json manifest{{"command", "simulate"}, {"configs", json::array()}};
    for (const auto& c : configs) manifest["configs"].push_back(to_json(c));
    write_manifest(a.out, manifest);
  }
  return exit_ok;
}

// ---------------------------------------------------------------- theory

struct TheoryArgs {
  int M = 4;
  std::size_t L = 4096;
  std::size_t pilots = 512;
  double p = -1.0;
  std::string snr = "-20:1:20";
  double rho0 = 1.0;
  std::string out = "-";
};

int cmd_theory(const TheoryArgs& a) {
  if (a.M < 2) throw UsageError("--M must be >= 2");
  double p = a.p;
  if (p < 0.0) {
    if (a.L == 0 || a.pilots > a.L) throw UsageError("need 0 <= --pilots <= --L");
    p = static_cast<double>(a.pilots) / static_cast<double>(a.L);
  } else if (p > 1.0) {
    throw UsageError("--p must lie in [0, 1]");
  }
  const double d = 1.0 - p;
  const auto grid = parse_snr_grid(a.snr);

  Output out(a.out);
  auto& os = out.stream();
  os << "snr_db,kappa,p,d,status,h1_0,h2_0,G0,H,A1,A2,B1,B2,phase_var_per_L,amp_var_per_L,amp_mean\n";
  for (const double snr : grid) {
    const double kappa = snr_db_to_kappa(snr);
    os << format_number(snr) << ',' << format_number(kappa) << ',' << format_number(p) << ','
       << format_number(d) << ',';
    NoiseFigures fig;
    try {
      fig = constants_gaussian(a.M, kappa);
    } catch (const TheoryOutOfRange&) {
      os << "out_of_range,,,,,,,,,,,\n";
      continue;
    }
    TheoryInput input{a.M, p, d, kappa, a.rho0};
    std::string status = "ok";
    std::string phase_var;
    std::string amp_var;
    try {
      const auto pred = predict(fig, input, 1);
      phase_var = format_number(pred.phase_var);
      amp_var = format_number(pred.amp_var);
    } catch (const TheoryOutOfRange&) {
      status = "breakdown";
    }
    os << status << ',' << format_number(fig.h1_0) << ',' << format_number(fig.h2_0) << ','
       << format_number(fig.G0(p, d)) << ',' << format_number(fig.H) << ',' << format_number(fig.A1) << ','
       << format_number(fig.A2) << ',' << format_number(fig.B1) << ',' << format_number(fig.B2) << ','
       << phase_var << ',' << amp_var << ',' << format_number(a.rho0 * fig.G0(p, d)) << '\n';
  }
  if (out.is_file()) {
    write_manifest(a.out, {{"command", "theory"},
                           {"M", a.M},
                           {"p", p},
                           {"snr_db", grid},
                           {"rho0", a.rho0}});
  }
  return exit_ok;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string in;
  int M = 4;
  std::string estimator = "mackenthun";
  double beta = 1.0;
  bool decisions = false;
  bool oracle = false;
  int precision = 12;
};

std::string decision_indices(const std::vector<cplx>& decisions, int M) {
  std::string s;
  for (std::size_t n = 0; n < decisions.size(); ++n) {
    if (n) s += ' ';
    s += std::to_string(hard_decision_index(decisions[n], 0.0, M));
  }
  return s;
}

int cmd_estimate(const EstimateArgs& a) {
  std::ifstream in(a.in);
  if (!in) throw std::runtime_error("cannot open '" + a.in + "'");
  const auto frame = read_sample_csv(in, a.M);

  auto number = [&](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", a.precision, v);
    return std::string(buf);
  };

  std::ostringstream line;
  std::optional<EstimateReport> report;
  if (a.estimator == "mackenthun" || a.estimator == "weighted") {
    report = mackenthun(frame, a.M, a.estimator == "weighted" ? a.beta : 1.0);
  } else if (a.estimator == "brute") {
    report = brute_force(frame, a.M, a.beta);
  } else if (a.estimator == "naive") {
    report = naive_enumeration(frame, a.M).report;
  } else if (a.estimator == "pilot") {
    const auto amp = pilot_only(frame);
    line << "rho_hat=" << number(amp.rho) << " theta_hat=" << number(amp.theta);
  } else if (a.estimator == "vv") {
    line << "theta_hat=" << number(viterbi_viterbi(frame, a.M));
  } else {
    throw UsageError("unknown estimator '" + a.estimator + "'");
  }
  if (report) {
    line << "rho_hat=" << number(report->amplitude.rho) << " theta_hat=" << number(report->amplitude.theta)
         << " objective=" << number(report->objective);
    if (a.decisions && report->data_decisions) {
      line << " decisions=" << decision_indices(*report->data_decisions, a.M);
    }
  }
  if (a.oracle) {
    const double beta = a.estimator == "weighted" || a.estimator == "brute" ? a.beta : 1.0;
    const auto truth = brute_force(frame, a.M, beta);
    const bool agree = report && std::abs(report->objective - truth.objective) <= 1e-9 * std::max(1.0, truth.objective);
    line << " oracle=" << (agree ? "agree" : "disagree");
  }
  std::cout << line.str() << '\n';
  return exit_ok;
}

// ---------------------------------------------------------------- selftest

struct SelftestArgs {
  std::string suite = "all";
  std::string inject_fault;
  bool full = false;
  unsigned threads = 0;
};

int cmd_selftest(const SelftestArgs& a) {
  selftest::Options options;
  options.scale = a.full ? selftest::Scale::full : selftest::Scale::reduced;
  options.suite = a.suite;
  options.inject_fault = a.inject_fault;
  options.threads = a.threads;
  std::vector<selftest::CheckResult> results;
  try {
    results = selftest::run(options);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::vector<std::string> failed;
  for (const auto& r : results) {
    std::printf("%s %-5s %-50s %7.2f s  %s\n", r.passed ? "PASS" : "FAIL", r.id.c_str(), r.name.c_str(), r.seconds,
                r.detail.c_str());
    if (!r.passed) failed.push_back(r.id + " (" + r.name + ")");
  }
  if (failed.empty()) {
    std::printf("PASS\n");
    return exit_ok;
  }
  std::printf("FAIL:");
  for (const auto& f : failed) std::printf(" %s;", f.c_str());
  std::printf("\n");
  return exit_selftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Least-squares M-PSK carrier phase and amplitude estimation with pilots"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PILOTSYNC_VERSION);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo sweep over an SNR grid; CSV output");
  simulate->add_option("--M", sim.M, "Constellation size")->check(CLI::Range(2, 1 << 16));
  simulate->add_option("--L", sim.L, "Frame length")->check(CLI::PositiveNumber);
  simulate->add_option("--pilots", sim.pilots, "Number of pilot symbols |P|");
  simulate->add_option("--snr", sim.snr, "SNR grid in dB: start:step:stop or a,b,c");
  simulate->add_option("--trials", sim.trials, "Replications per SNR point");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--estimator", sim.estimators, "mackenthun|pilot|vv|weighted (comma list allowed)")
      ->delimiter(',')
      ->check(CLI::IsMember({"mackenthun", "pilot", "vv", "weighted"}));
  simulate->add_option("--beta", sim.beta, "Data weight for the weighted estimator")->check(CLI::PositiveNumber);
  simulate->add_option("--noise", sim.noise, "gaussian|ring")->check(CLI::IsMember({"gaussian", "ring"}));
  simulate->add_option("--layout", sim.layout, "Pilot placement: prefix|spread")
      ->check(CLI::IsMember({"prefix", "spread"}));
  simulate->add_option("--rho0", sim.rho0, "Channel amplitude")->check(CLI::PositiveNumber);
  simulate->add_option("--theory-samples", sim.theory_samples, "Monte-Carlo samples for non-Gaussian theory");
  simulate->add_option("--out", sim.out, "Output CSV path ('-' for stdout)");
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
  simulate->add_option("--manifest", sim.manifest, "Re-run the configuration stored in a manifest");

  TheoryArgs th;
  auto* theory = app.add_subcommand("theory", "Asymptotic constants and variances over an SNR grid");
  theory->add_option("--M", th.M, "Constellation size");
  theory->add_option("--L", th.L, "Frame length (with --pilots sets p)");
  theory->add_option("--pilots", th.pilots, "Number of pilot symbols");
  theory->add_option("--p", th.p, "Pilot fraction (overrides --L/--pilots)");
  theory->add_option("--snr", th.snr, "SNR grid in dB");
  theory->add_option("--rho0", th.rho0, "Channel amplitude")->check(CLI::PositiveNumber);
  theory->add_option("--out", th.out, "Output CSV path ('-' for stdout)");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate a0 from a sample CSV file");
  estimate->add_option("--in", est.in, "Input CSV (index,re_y,im_y,is_pilot,re_p,im_p)")->required();
  estimate->add_option("--M", est.M, "Constellation size")->check(CLI::Range(2, 1 << 16));
  estimate->add_option("--estimator", est.estimator, "mackenthun|weighted|brute|naive|pilot|vv")
      ->check(CLI::IsMember({"mackenthun", "weighted", "brute", "naive", "pilot", "vv"}));
  estimate->add_option("--beta", est.beta, "Data weight")->check(CLI::PositiveNumber);
  estimate->add_flag("--decisions", est.decisions, "Print data decisions as symbol indices");
  estimate->add_flag("--oracle", est.oracle, "Cross-check against exhaustive search");
  estimate->add_option("--precision", est.precision, "Significant digits")->check(CLI::Range(1, 17));

  SelftestArgs st;
  auto* self = app.add_subcommand("selftest", "Run the acceptance checks at reduced scale");
  self->add_option("--suite", st.suite, "all|oracle|quadrature|theory|phenomena");
  self->add_flag("--full", st.full, "Run at full acceptance scale");
  self->add_option("--threads", st.threads, "Worker threads");
  self->add_option("--inject-fault", st.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*theory) return cmd_theory(th);
    if (*estimate) return cmd_estimate(est);
    if (*self) return cmd_selftest(st);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_usage;
}
