#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbo/ad/tensor.hpp"

namespace turbo::ad {

enum class OptimizerKind { Sgd, Adam };

std::string optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws std::invalid_argument naming the bad field.
  void validate() const;
};

/// Moment estimates for Adam; empty for plain descent.
struct OptimizerState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

/// One in-place update of `params`. Adam moments are lazily shaped on the
/// first step.
void optimizer_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, OptimizerState& state,
                    const OptimizerConfig& config);

}  // namespace turbo::ad
