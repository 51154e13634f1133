#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pilotsync::selftest {

enum class Scale {
  full,     ///< acceptance-level trial counts
  reduced,  ///< quick run for the command-line self-test
};

struct Options {
  Scale scale = Scale::full;
  /// "all" or one of suite_names().
  std::string suite = "all";
  /// Check id (e.g. "AC3") whose measured quantity is perturbed; test-harness use only.
  std::string inject_fault;
  unsigned threads = 0;
  std::uint64_t seed = 20120917;
};

struct CheckResult {
  std::string id;
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<std::string> suite_names();

/// Runs every check of the selected suite(s) in id order.
/// Throws std::invalid_argument for an unknown suite name.
std::vector<CheckResult> run(const Options& options);

}  // namespace pilotsync::selftest
