#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "turbo/train/engine.hpp"

namespace turbo::eval {

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b| over the
/// pooled sample, computed by a sorted merge that steps through ties
/// together. Throws std::invalid_argument on empty input.
double ks_distance(std::span<const double> a, std::span<const double> b);

/// Fraction of rows of `samples` [n, 2] within `radius` of each center.
std::vector<double> mode_coverage(const ad::Tensor& samples, const std::vector<std::array<double, 2>>& centers,
                                  double radius);

/// Mean over all entries of (a - b)^2.
double mse(const ad::Tensor& a, const ad::Tensor& b);

struct MetricsRecord {
  std::string preset;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;
  std::size_t samples = 0;
  /// Named scalars in a fixed order (ks_*, mse_*, baseline_*, nll, ...).
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<double> mode_fractions;

  /// Throws std::out_of_range if absent.
  double get(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// Evaluates on a fresh batch drawn from the eval seed. Reports, when the
/// preset produces them: per-dimension KS for x~ vs x, z~ vs z, x^ vs x and
/// z^ vs z; paired MSE(z, z~) and MSE(x, x~) when data are paired; cycle
/// MSE(x, x^) and MSE(z, z^); the same MSEs for the untrained network
/// (baseline_*); mode coverage of x~ on the ring; and for FLOW the held-out
/// NLL and, on linear-gaussian data, its gap to the analytic entropy.
MetricsRecord evaluate_run(const train::RunState& state);

std::string summary_json(const MetricsRecord& r);
MetricsRecord parse_summary_json(const std::string& text);

/// Writes summary.json and eval.tsv into the run directory.
void write_eval(const std::filesystem::path& dir, const MetricsRecord& r);
MetricsRecord load_summary(const std::filesystem::path& dir);

/// One row per run, one column per metric (union, first-seen order);
/// tab-separated, '-' where a run lacks a metric.
std::string report_table(const std::vector<std::pair<std::string, MetricsRecord>>& runs);

}  // namespace turbo::eval
