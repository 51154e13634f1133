// Acceptance suite at full scale: one line per criterion, nonzero exit on any failure.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "pilotsync/selftest.hpp"

int main(int argc, char** argv) {
  pilotsync::selftest::Options options;
  options.scale = pilotsync::selftest::Scale::full;
  if (argc > 1) options.suite = argv[1];
  if (const char* t = std::getenv("PILOTSYNC_THREADS")) options.threads = static_cast<unsigned>(std::atoi(t));

  int failures = 0;
  for (const auto& r : pilotsync::selftest::run(options)) {
    std::printf("%s: %s  %s  [%.1f s] %s\n", r.id.c_str(), r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
    failures += r.passed ? 0 : 1;
  }
  std::printf("%s (%d failed)\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failures);
  return failures ? 1 : 0;
}
