#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "pilotsync/estimators.hpp"
#include "pilotsync/io.hpp"

using namespace pilotsync;
namespace fs = std::filesystem;

namespace {

std::string header() { return std::string(sample_csv_header) + "\n"; }

std::size_t parse_error_line(const std::string& text, int M = 4) {
  std::istringstream in(text);
  try {
    (void)read_sample_csv(in, M);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

struct Run {
  int code;
  std::string out;
};

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("pilotsync_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const auto out = scratch() / "stdout.txt";
  const std::string cmd = std::string(PILOTSYNC_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_frame(const fs::path& p, std::size_t L, std::size_t P, int M, double sigma, std::uint64_t seed,
                 ChannelParams params = {1.0, 0.0}) {
  Rng rng(seed);
  auto plan = std::make_shared<const FramePlan>(FramePlan::make(L, P, M));
  const auto s = random_frame(*plan, Constellation(M), rng);
  const auto frame = sigma > 0 ? apply_channel(plan, s, params, GaussianNoise(sigma), rng)
                               : apply_channel(plan, s, params, NullNoise{}, rng);
  std::ofstream out(p);
  write_sample_csv(out, frame);
}

}  // namespace

TEST_CASE("sample CSV round trip") {
  Rng rng(1);
  auto plan = std::make_shared<const FramePlan>(FramePlan::make(10, 3, 4, PilotLayout::spread));
  const auto s = random_frame(*plan, Constellation(4), rng);
  const auto frame = apply_channel(plan, s, {0.8, 1.1}, GaussianNoise(0.3), rng);
  std::stringstream buf;
  write_sample_csv(buf, frame);
  const auto back = read_sample_csv(buf, 4);
  REQUIRE(back.plan().length() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(back[i] == frame[i]);
  CHECK(back.plan().pilot_count() == 3);
}

TEST_CASE("sample CSV errors name the line") {
  CHECK(parse_error_line("") == 0 + 0);  // empty input reports line 0
  CHECK(parse_error_line("bogus\n") == 1);
  CHECK(parse_error_line(header() + "0,1,0,1,1,0\n1,1,0,0\n") == 3);
  CHECK(parse_error_line(header() + "0,abc,0,0,,\n") == 2);
  CHECK(parse_error_line(header() + "0,1,0,1,0.5,0.5\n") == 2);
  CHECK(parse_error_line(header() + "0,1,0,0,,\n0,1,0,0,,\n") == 3);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_sample_csv(empty, 4), ParseError);
  std::istringstream gap(header() + "0,1,0,0,,\n2,1,0,0,,\n");
  CHECK_THROWS_AS(read_sample_csv(gap, 4), ParseError);
}

TEST_CASE("SNR grid parsing") {
  const auto g = parse_snr_grid("-20:1:20");
  CHECK(g.size() == 41);
  CHECK(g.front() == -20.0);
  CHECK(g.back() == 20.0);
  CHECK(parse_snr_grid("0:0.1:1").size() == 11);
  CHECK(parse_snr_grid("7").size() == 1);
  CHECK(parse_snr_grid("1,2.5,4") == std::vector<double>{1.0, 2.5, 4.0});
  CHECK_THROWS(parse_snr_grid("1:0:3"));
  CHECK_THROWS(parse_snr_grid("a:b"));
  CHECK_THROWS(parse_snr_grid(""));
}

TEST_CASE("config JSON round trip") {
  SweepConfig c;
  c.M = 8;
  c.pilot_count = 12;
  c.snr_grid_db = {1.0, 2.0};
  c.estimator = {EstimatorKind::weighted, 0.25};
  c.noise = NoiseKind::ring;
  c.layout = PilotLayout::spread;
  const auto back = sweep_config_from_json(to_json(c));
  CHECK(back.M == 8);
  CHECK(back.pilot_count == 12);
  CHECK(back.estimator.kind == EstimatorKind::weighted);
  CHECK(back.estimator.beta == 0.25);
  CHECK(back.noise == NoiseKind::ring);
  CHECK(back.layout == PilotLayout::spread);
  CHECK(back.snr_grid_db == c.snr_grid_db);
}

TEST_CASE("cli simulate") {
  const auto csv = scratch() / "sim.csv";
  const std::string args =
      "simulate --M 4 --L 64 --pilots 8 --snr -20:10:20 --trials 50 --seed 1 --estimator mackenthun,vv --out " +
      csv.string();
  REQUIRE(cli(args).code == 0);
  const auto first = slurp(csv);
  CHECK(fs::exists(csv.string() + ".manifest.json"));
  std::size_t lines = 0;
  for (char ch : first) lines += ch == '\n';
  CHECK(lines == 1 + 5 * 2);
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(csv) == first);

  // Re-running from the manifest reproduces the CSV.
  const auto rerun = scratch() / "rerun.csv";
  REQUIRE(cli("simulate --manifest " + csv.string() + ".manifest.json --out " + rerun.string()).code == 0);
  CHECK(slurp(rerun) == first);

  CHECK(cli("simulate --trials 0").code == 1);
  CHECK(cli("simulate --estimator nonsense").code == 1);
  CHECK(cli("simulate --L 8 --pilots 9").code == 1);
  CHECK(cli("").code == 1);
}

TEST_CASE("cli theory") {
  const auto r = cli("theory --M 4 --p 1 --snr -30,0,40");
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("snr_db,kappa,", 0) == 0);
  std::getline(in, line);
  CHECK(line.find("out_of_range") != std::string::npos);
  std::getline(in, line);
  CHECK(line.find(",ok,") != std::string::npos);
  // p = 1 at 0 dB: phase_var_per_L = 1/(2 kappa) = 0.5.
  CHECK(line.find(",0.5,0.5,1") != std::string::npos);
}

TEST_CASE("cli estimate") {
  const auto pilots = scratch() / "pilots.csv";
  write_frame(pilots, 12, 12, 4, 0.0, 3, {1.5, 0.25});
  auto r = cli("estimate --in " + pilots.string() + " --M 4 --precision 17");
  REQUIRE(r.code == 0);
  double rho = 0.0;
  double theta = 0.0;
  REQUIRE(std::sscanf(r.out.c_str(), "rho_hat=%lf theta_hat=%lf", &rho, &theta) == 2);
  CHECK(std::abs(rho - 1.5) < 1e-12);
  CHECK(std::abs(theta - 0.25) < 1e-12);

  const auto six = scratch() / "six.csv";
  write_frame(six, 8, 2, 4, 0.4, 4);
  const auto fast = cli("estimate --in " + six.string() + " --M 4 --decisions");
  const auto brute = cli("estimate --in " + six.string() + " --M 4 --estimator brute --decisions");
  REQUIRE(fast.code == 0);
  CHECK(fast.out == brute.out);
  CHECK(cli("estimate --in " + six.string() + " --M 4 --oracle").out.find("oracle=agree") != std::string::npos);

  const auto long_frame = scratch() / "long.csv";
  write_frame(long_frame, 40, 2, 4, 0.4, 5);
  CHECK(cli("estimate --in " + long_frame.string() + " --M 4 --oracle").code == 2);

  const auto empty = scratch() / "empty.csv";
  std::ofstream(empty).close();
  CHECK(cli("estimate --in " + empty.string() + " --M 4").code == 2);
  CHECK(cli("estimate --in " + (scratch() / "missing.csv").string()).code == 2);
}

TEST_CASE("cli selftest") {
  const auto ok = cli("selftest --suite quadrature");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS AC6") != std::string::npos);
  const auto bad = cli("selftest --suite quadrature --inject-fault AC6");
  CHECK(bad.code == 3);
  CHECK(bad.out.find("FAIL AC6") != std::string::npos);
  CHECK(cli("selftest --suite nonsense").code == 1);
}
