#pragma once

// Affine coupling flow. Block k keeps one half of the coordinates fixed and
// transforms the other: x_b = z_b * exp(s(z_a)) + t(z_a). Even blocks
// condition on the first half, odd blocks on the second. The conditioner
// emits [raw_s, t]; s = scale_bound * tanh(raw_s).

#include <cstdint>
#include <vector>

#include "turbo/nn/mlp.hpp"

namespace turbo::nn {

struct CouplingFlowSpec {
  std::size_t dim = 2;
  std::size_t blocks = 4;
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::Tanh;
  double scale_bound = 2.0;

  /// Conditioner for one block: dim/2 -> hidden -> dim.
  MlpSpec conditioner() const;
  std::size_t tensors_per_block() const { return 2 * (hidden.size() + 1); }
  void validate() const;
};

/// Conditioners use the MLP initialization except for a zero last layer,
/// so a fresh flow is the identity map.
ParamSet init_flow_params(const CouplingFlowSpec& spec, std::uint64_t seed);

struct FlowOutput {
  Var value;    // [batch, dim]
  Var log_det;  // [batch]
};

FlowOutput coupling_forward(const CouplingFlowSpec& spec, const std::vector<Var>& params, Var z);
FlowOutput coupling_inverse(const CouplingFlowSpec& spec, const std::vector<Var>& params, Var x);

}  // namespace turbo::nn
