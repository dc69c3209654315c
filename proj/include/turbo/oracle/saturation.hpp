#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "turbo/oracle/terms.hpp"

namespace turbo::oracle {

enum class BoundKind { DirectEnc, DirectDec, ReverseDec, ReverseEnc };

inline constexpr std::array<BoundKind, 4> kAllBounds = {BoundKind::DirectEnc, BoundKind::DirectDec,
                                                        BoundKind::ReverseDec, BoundKind::ReverseEnc};
/// Mixing weights for perturbations, cycled by trial index.
inline constexpr std::array<double, 4> kPerturbationWeights = {0.01, 0.1, 0.5, 1.0};
inline constexpr double kSaturationTolerance = 1e-9;

std::string_view bound_name(BoundKind b);
double bound_value(const TermBreakdown& t, BoundKind b);

struct PerturbationViolation {
  std::size_t trial = 0;
  double mixing_weight = 0.0;
  double value = 0.0;
  prob::StochasticKernel kernel;
};

struct SaturationReport {
  BoundKind which = BoundKind::DirectEnc;
  double optimum = 0.0;          ///< bound at the optimal kernel
  double identity_target = 0.0;  ///< ceiling minus the entropy term
  double identity_residual = 0.0;
  double max_perturbed = -std::numeric_limits<double>::infinity();
  double max_excess = -std::numeric_limits<double>::infinity();  ///< max over trials of value - optimum
  std::size_t trials = 0;
  std::vector<PerturbationViolation> violations;

  bool passed() const { return identity_residual <= kSaturationTolerance && violations.empty(); }
};

struct SaturationOptions {
  /// Fault-injection hook: replaces the optimal kernel by a half-and-half mix
  /// with a random kernel before checking. Used to prove the check can fail.
  bool corrupt_optimum = false;
};

/// Sets the kernel that `which` depends on to its maximizer, records the
/// bound, then checks `trials` convex perturbations never exceed it. The
/// kernel on the other side of the system is drawn from `seed`.
SaturationReport saturation_check(const prob::FiniteJoint& joint, BoundKind which, std::size_t trials,
                                  std::uint64_t seed, const SaturationOptions& options = {});

/// The maximizing kernel for `which` given the rest of `sys`.
prob::StochasticKernel optimal_kernel(const TurboSystem& sys, BoundKind which);

}  // namespace turbo::oracle
