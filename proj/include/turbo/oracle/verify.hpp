#pragma once

// Property battery over random finite systems: the bound chain, the two
// bottleneck formulas, saturation of each bound, and preset decompositions.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace turbo::oracle {

enum class Fault {
  None,
  /// Corrupts the optimal kernel inside every saturation check.
  CorruptOptimum,
};

struct VerifyOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  std::size_t min_size = 2;
  std::size_t max_size = 8;
  /// Systems used by the saturation property (each checks all four bounds).
  std::size_t saturation_systems = 50;
  std::size_t perturbations = 100;
  /// BIB-AE dual-formula property runs on this many systems.
  std::size_t bibae_systems = 200;
  unsigned threads = 1;
  Fault fault = Fault::None;

  void validate() const;
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  /// Largest observed excess over the allowed value (negative = slack).
  double max_violation = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  std::size_t checks = 0;
  /// First failing case, if any.
  std::string detail;
};

struct VerifyReport {
  VerifyOptions options;
  std::vector<PropertyResult> properties;
  double seconds = 0.0;

  bool all_passed() const;
  const PropertyResult& property(const std::string& name) const;
  nlohmann::json to_json() const;
};

VerifyReport run_verify(const VerifyOptions& options);

}  // namespace turbo::oracle
