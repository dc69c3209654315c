#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbo/ad/ops.hpp"

namespace turbo::nn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class Activation { Identity, Tanh, Relu, Sigmoid };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// Dense stack: widths = {input, hidden..., output}; one activation per
/// hidden layer, then `final_activation` on the output.
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> hidden_activations;
  Activation final_activation = Activation::Identity;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }
  void validate() const;
};

/// Convenience: same activation on every hidden layer.
MlpSpec make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                 Activation act = Activation::Tanh);

/// Flat list of tensors: w0 [in, h1], b0 [h1], w1, b1, ...
using ParamSet = std::vector<Tensor>;

/// Weights ~ U(-k, k) with k = kInitGain / sqrt(fan_in); biases zero.
inline constexpr double kInitGain = 1.0;
ParamSet init_params(const MlpSpec& spec, std::uint64_t seed);

/// Puts every tensor on the tape, as parameters or as constants.
std::vector<Var> bind(Tape& tape, const ParamSet& params, bool trainable);

Var mlp_forward(const MlpSpec& spec, const std::vector<Var>& params, Var input);

std::size_t param_count(const ParamSet& params);

}  // namespace turbo::nn
