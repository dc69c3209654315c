#pragma once

#include <string>

#include "turbo/nn/mlp.hpp"

namespace turbo::nn {

enum class CriticMode { Logistic, Clipped };

std::string critic_mode_name(CriticMode m);

/// Scalar scorer. Logistic scores are logits; clipped scores are raw
/// Wasserstein-style values and the trainer clamps weights to [-clip, clip]
/// after each critic update.
struct CriticSpec {
  MlpSpec net;
  CriticMode mode = CriticMode::Logistic;
  double clip = 0.01;

  void validate() const;
};

/// Scores of shape [batch].
Var critic_forward(const CriticSpec& spec, const std::vector<Var>& params, Var input);

/// Clamps every entry into [-clip, clip].
void clip_params(ParamSet& params, double clip);

}  // namespace turbo::nn
