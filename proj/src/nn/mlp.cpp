#include "turbo/nn/mlp.hpp"

#include <cmath>
#include <fmt/format.h>

#include "turbo/util/rng.hpp"

namespace turbo::nn {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument(fmt::format("unknown activation '{}' (expected identity, tanh, relu or sigmoid)", name));
}

void MlpSpec::validate() const {
  if (widths.size() < 3) throw std::invalid_argument("mlp: need input, at least one hidden layer, and output");
  for (std::size_t w : widths)
    if (w < 1) throw std::invalid_argument("mlp: widths must be >= 1");
  if (hidden_activations.size() != widths.size() - 2) {
    throw std::invalid_argument(fmt::format("mlp: {} hidden layers but {} activations", widths.size() - 2,
                                            hidden_activations.size()));
  }
}

MlpSpec make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Activation act) {
  MlpSpec s;
  s.widths.push_back(in);
  s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
  s.widths.push_back(out);
  s.hidden_activations.assign(hidden.size(), act);
  s.validate();
  return s;
}

ParamSet init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ParamSet out;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const std::size_t fan_out = spec.widths[l + 1];
    const double k = kInitGain / std::sqrt(static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    for (double& v : w.data()) v = rng.uniform(-k, k);
    out.push_back(std::move(w));
    out.emplace_back(ad::Shape{fan_out}, 0.0);
  }
  return out;
}

std::vector<Var> bind(Tape& tape, const ParamSet& params, bool trainable) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (const Tensor& t : params) out.push_back(trainable ? tape.parameter(t) : tape.constant(t));
  return out;
}

namespace {
Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Relu: return ad::relu(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
  }
  return x;
}
}  // namespace

Var mlp_forward(const MlpSpec& spec, const std::vector<Var>& params, Var input) {
  if (params.size() != 2 * spec.layers()) {
    throw ad::ShapeError(fmt::format("mlp: expected {} parameter tensors, got {}", 2 * spec.layers(), params.size()));
  }
  const ad::Tensor& x = input.value();
  if (x.rank() != 2 || x.dim(1) != spec.input_width()) {
    throw ad::ShapeError(fmt::format("mlp: input shape {} does not match width {}", ad::to_string(x.shape()),
                                     spec.input_width()));
  }
  Var h = input;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    h = ad::matmul(h, params[2 * l]) + params[2 * l + 1];
    h = activate(h, l + 1 < spec.layers() ? spec.hidden_activations[l] : spec.final_activation);
  }
  return h;
}

std::size_t param_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& t : params) n += t.numel();
  return n;
}

}  // namespace turbo::nn
