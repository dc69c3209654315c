#pragma once

// Trainable stand-ins for the eight terms. Reconstruction terms drop the
// additive normalizing constant of the exponential-deviation likelihood;
// flow_nll is exact. Adversarial surrogates (logistic, clipped Wasserstein)
// approximate a divergence but lose its direction.

#include <string>

#include "turbo/nn/coupling.hpp"
#include "turbo/nn/critic.hpp"

namespace turbo::loss {

using ad::Var;

enum class Norm { L2, L1 };
std::string norm_name(Norm n);
Norm parse_norm(const std::string& s);

struct ReconConfig {
  Norm norm = Norm::L2;
  double alpha = 1.0;
  void validate() const;
};

enum class AdvSurrogate { Logistic, Wasserstein };
std::string surrogate_name(AdvSurrogate s);
AdvSurrogate parse_surrogate(const std::string& s);

struct AdvConfig {
  AdvSurrogate surrogate = AdvSurrogate::Logistic;
  std::size_t critic_steps = 1;
  double clip = 0.01;
  void validate() const;
};

/// alpha * mean over rows of sum_j |output - target|^p.
Var recon_loss(const ReconConfig& cfg, Var target, Var output);

/// From critic scores. Logistic: 0.5 * [BCE(real -> 1) + BCE(fake -> 0)];
/// wasserstein: mean(fake) - mean(real).
Var adv_critic_from_scores(const AdvConfig& cfg, Var real_scores, Var fake_scores);
/// Logistic: -mean log sigmoid(fake) (non-saturating); wasserstein: -mean(fake).
Var adv_generator_from_scores(const AdvConfig& cfg, Var fake_scores);

Var adv_loss_critic(const AdvConfig& cfg, const nn::CriticSpec& critic, const std::vector<Var>& critic_params,
                    Var real_batch, Var fake_batch);
Var adv_loss_generator(const AdvConfig& cfg, const nn::CriticSpec& critic, const std::vector<Var>& critic_params,
                       Var fake_batch);

/// Mean over rows of -log N(f^{-1}(x); 0, I) - log|det d f^{-1}/dx|.
Var flow_nll(const nn::CouplingFlowSpec& spec, const std::vector<Var>& params, Var x);

/// Mean over rows of KL(N(mean, diag exp(logvar)) || N(0, I)).
Var gaussian_kl_standard(Var mean, Var logvar);

}  // namespace turbo::loss
