#include "turbo/nn/coupling.hpp"

#include <fmt/format.h>

#include "turbo/util/rng.hpp"

namespace turbo::nn {

MlpSpec CouplingFlowSpec::conditioner() const { return make_mlp(dim / 2, hidden, dim, activation); }

void CouplingFlowSpec::validate() const {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("flow: dimension must be even and >= 2");
  if (blocks < 1) throw std::invalid_argument("flow: need at least one coupling block");
  if (hidden.empty()) throw std::invalid_argument("flow: conditioner needs a hidden layer");
  if (!(scale_bound > 0.0)) throw std::invalid_argument("flow: scale_bound must be positive");
}

ParamSet init_flow_params(const CouplingFlowSpec& spec, std::uint64_t seed) {
  spec.validate();
  const MlpSpec cond = spec.conditioner();
  ParamSet out;
  for (std::size_t b = 0; b < spec.blocks; ++b) {
    ParamSet block = init_params(cond, Rng::derive(seed, {b}));
    for (double& v : block[block.size() - 2].data()) v = 0.0;
    for (auto& t : block) out.push_back(std::move(t));
  }
  return out;
}

namespace {

struct BlockParts {
  Var s;
  Var t;
};

std::vector<Var> block_params(const CouplingFlowSpec& spec, const std::vector<Var>& params, std::size_t b) {
  const std::size_t n = spec.tensors_per_block();
  return std::vector<Var>(params.begin() + static_cast<std::ptrdiff_t>(b * n),
                          params.begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
}

BlockParts conditioner_out(const CouplingFlowSpec& spec, const std::vector<Var>& bp, Var cond_in) {
  const std::size_t h = spec.dim / 2;
  Var raw = mlp_forward(spec.conditioner(), bp, cond_in);
  Var s = spec.scale_bound * ad::tanh(ad::slice(raw, 1, 0, h));
  Var t = ad::slice(raw, 1, h, spec.dim);
  return {s, t};
}

void check(const CouplingFlowSpec& spec, const std::vector<Var>& params, const Var& in) {
  spec.validate();
  if (params.size() != spec.blocks * spec.tensors_per_block()) {
    throw ad::ShapeError(fmt::format("flow: expected {} parameter tensors, got {}",
                                     spec.blocks * spec.tensors_per_block(), params.size()));
  }
  const auto& v = in.value();
  if (v.rank() != 2 || v.dim(1) != spec.dim) {
    throw ad::ShapeError(fmt::format("flow: input shape {} does not match dimension {}", ad::to_string(v.shape()),
                                     spec.dim));
  }
}

}  // namespace

FlowOutput coupling_forward(const CouplingFlowSpec& spec, const std::vector<Var>& params, Var z) {
  check(spec, params, z);
  const std::size_t h = spec.dim / 2;
  Var cur = z;
  Var log_det;
  for (std::size_t b = 0; b < spec.blocks; ++b) {
    const bool first_fixed = b % 2 == 0;
    Var lo = ad::slice(cur, 1, 0, h);
    Var hi = ad::slice(cur, 1, h, spec.dim);
    Var fixed = first_fixed ? lo : hi;
    Var moving = first_fixed ? hi : lo;
    const BlockParts p = conditioner_out(spec, block_params(spec, params, b), fixed);
    Var moved = moving * ad::exp(p.s) + p.t;
    cur = first_fixed ? ad::concat({fixed, moved}, 1) : ad::concat({moved, fixed}, 1);
    Var ld = ad::sum(p.s, 1);
    log_det = b == 0 ? ld : log_det + ld;
  }
  return {cur, log_det};
}

FlowOutput coupling_inverse(const CouplingFlowSpec& spec, const std::vector<Var>& params, Var x) {
  check(spec, params, x);
  const std::size_t h = spec.dim / 2;
  Var cur = x;
  Var log_det;
  for (std::size_t k = spec.blocks; k-- > 0;) {
    const bool first_fixed = k % 2 == 0;
    Var lo = ad::slice(cur, 1, 0, h);
    Var hi = ad::slice(cur, 1, h, spec.dim);
    Var fixed = first_fixed ? lo : hi;
    Var moved = first_fixed ? hi : lo;
    const BlockParts p = conditioner_out(spec, block_params(spec, params, k), fixed);
    Var moving = (moved - p.t) * ad::exp(-p.s);
    cur = first_fixed ? ad::concat({fixed, moving}, 1) : ad::concat({moving, fixed}, 1);
    Var ld = -ad::sum(p.s, 1);
    log_det = k + 1 == spec.blocks ? ld : log_det + ld;
  }
  return {cur, log_det};
}

}  // namespace turbo::nn
