#pragma once

// Run configuration: a sectioned key = value file ('#' and ';' start
// comments). Unknown sections or keys are errors. Every default is
// materialized in the resolved echo written next to a run.
//
// [run]          preset, seed, data_seed, eval_seed, steps, batch_size,
//                log_interval, checkpoint_interval, eval_samples, mode_radius
// [data]         family, dim_x, dim_z, noise, mixing, offset, latent_scale,
//                moon_noise, rotation, moon_scale, modes, radius, mode_std,
//                paired, normalize
// [weights]      lambda_d, lambda_r, lambda_t
// [terms]        CUSTOM only: <term> = coefficient for any of the eight
//                terms, plus alae and vae_prior
// [network]      hidden, activation, critic_hidden, critic_activation,
//                noise_dim
// [flow]         blocks, hidden, activation, scale_bound
// [optimizer] [critic_optimizer]   kind, lr, beta1, beta2, eps
// [adversarial]  surrogate, critic_steps, clip
// [recon]        norm, alpha (default for every reconstruction term)
// [recon_L_zt] [recon_L_xh] [recon_L_xt] [recon_L_zh]   per-term override

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "turbo/ad/optimizer.hpp"
#include "turbo/core/terms.hpp"
#include "turbo/data/synth.hpp"
#include "turbo/loss/surrogates.hpp"
#include "turbo/nn/coupling.hpp"

namespace turbo::train {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  Preset preset = Preset::TURBO_FULL;
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 2;
  std::uint64_t eval_seed = 3;
  std::uint64_t steps = 20000;
  std::size_t batch_size = 256;
  std::uint64_t log_interval = 100;
  std::uint64_t checkpoint_interval = 5000;
  std::size_t eval_samples = 10000;
  double mode_radius = 0.2;

  data::DatasetSpec data;
  TurboWeights weights;
  /// Resolved from the preset, or from [terms] under CUSTOM.
  TermCoefficients coefficients;

  std::vector<std::size_t> hidden{64, 64};
  nn::Activation activation = nn::Activation::Tanh;
  std::vector<std::size_t> critic_hidden{64, 64};
  nn::Activation critic_activation = nn::Activation::Tanh;
  std::size_t noise_dim = 0;
  nn::CouplingFlowSpec flow;

  ad::OptimizerConfig optimizer;
  ad::OptimizerConfig critic_optimizer;
  loss::AdvConfig adversarial;
  /// Indexed by Term; only the four reconstruction entries are used.
  std::array<loss::ReconConfig, kTermCount> recon{};

  const loss::ReconConfig& recon_for(Term t) const { return recon[static_cast<int>(t)]; }
};

/// Parses and validates. Messages name the offending field as section.key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Cross-field checks (pairing, dimensions, preset constraints).
void validate(const RunConfig& cfg);

/// Every field, defaults included, in the same format parse_config reads.
std::string resolved_ini(const RunConfig& cfg);

}  // namespace turbo::train
