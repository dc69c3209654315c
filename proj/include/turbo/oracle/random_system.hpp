#pragma once

// Random full-support systems for property suites. Each simplex point is a
// vector of independent Exp(1) draws normalized to unit mass, which is a
// flat Dirichlet sample.

#include "turbo/oracle/terms.hpp"
#include "turbo/util/rng.hpp"

namespace turbo::oracle {

prob::FiniteDist random_dist(std::size_t n, Rng& rng);
prob::StochasticKernel random_kernel(std::size_t n_in, std::size_t n_out, Rng& rng);
prob::FiniteJoint random_joint(std::size_t n_x, std::size_t n_z, Rng& rng);
TurboSystem random_system(std::size_t n_x, std::size_t n_z, Rng& rng);
/// Alphabet sizes drawn uniformly from [min_size, max_size].
TurboSystem random_system_sized(std::size_t min_size, std::size_t max_size, Rng& rng);

/// Convex mixture (1 - weight) a + weight b of two kernels of equal shape.
prob::StochasticKernel mix_kernels(const prob::StochasticKernel& a, const prob::StochasticKernel& b, double weight);

}  // namespace turbo::oracle
