#pragma once

// Training loop for every preset.
//
// Networks: encoder x -> z (mean/log-variance head under VAE_LIKE), decoder
// z -> x, one critic on the latent space and one on the data space, shared
// by the direct and reverse paths. FLOW uses a single coupling flow whose
// forward map is the decoder and whose inverse is the encoder. A network is
// instantiated only if some active term reads it.
//
// Each step: (1) every critic takes critic_steps updates against detached
// fakes from the current generator; (2) one optimizer step over encoder and
// decoder jointly on the weighted sum of active terms, critics frozen.
//
// Batches and noise are pure functions of (seeds, step), so a resumed run
// replays the same stream as an uninterrupted one.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbo/ad/checkpoint.hpp"
#include "turbo/ad/optimizer.hpp"
#include "turbo/nn/coupling.hpp"
#include "turbo/nn/critic.hpp"
#include "turbo/train/config.hpp"

namespace turbo::train {

/// A loss became non-finite or left its domain.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(std::string term, std::uint64_t step, const std::string& detail);
  const std::string& term() const { return term_; }
  std::uint64_t step() const { return step_; }

 private:
  std::string term_;
  std::uint64_t step_;
};

struct NetworkNeeds {
  bool encoder = false;
  bool decoder = false;
  bool critic_z = false;
  bool critic_x = false;
  bool flow = false;
};

NetworkNeeds required_networks(const RunConfig& cfg);

struct RunState {
  RunConfig cfg;
  NetworkNeeds needs;
  std::uint64_t step = 0;

  nn::MlpSpec enc_spec, dec_spec;
  nn::CriticSpec critic_z_spec, critic_x_spec;
  nn::CouplingFlowSpec flow_spec;

  nn::ParamSet enc, dec, critic_z, critic_x, flow;
  ad::OptimizerState gen_opt, critic_z_opt, critic_x_opt;

  bool vae_head() const { return cfg.coefficients.vae_prior_active; }
};

/// Surrogate values for one step; inactive terms are NaN.
struct StepRecord {
  std::uint64_t step = 0;
  std::array<double, kTermCount> terms{};
  double vae_prior = 0.0;
  double alae = 0.0;
  double direct = 0.0;
  double reverse = 0.0;
  double total = 0.0;
  double critic_z = 0.0;
  double critic_x = 0.0;
};

RunState build_run(const RunConfig& cfg);

/// Training batch for a given 1-based step.
data::PairedBatch training_batch(const RunConfig& cfg, std::uint64_t step);

struct GeneratorObjective {
  StepRecord record;
  /// Gradients of record.total in the order encoder, decoder, flow.
  std::vector<ad::Tensor> grads;
};

/// Weighted generator loss at the current parameters with critics frozen,
/// using the noise stream of `step`. Does not modify the state.
GeneratorObjective generator_objective(const RunState& state, const data::PairedBatch& batch, std::uint64_t step);

/// Advances state.step by one using `batch`.
StepRecord train_step(RunState& state, const data::PairedBatch& batch);

/// Network outputs for a batch, evaluated without gradients. Missing
/// networks leave their outputs empty.
struct Outputs {
  std::optional<ad::Tensor> z_tilde;  // enc(x)
  std::optional<ad::Tensor> x_hat;    // dec(enc(x))
  std::optional<ad::Tensor> x_tilde;  // dec(z)
  std::optional<ad::Tensor> z_hat;    // enc(dec(z))
};
Outputs forward_all(const RunState& state, const ad::Tensor& x, const ad::Tensor& z, std::uint64_t noise_seed);

/// Exact held-out negative log-likelihood of a FLOW run (mean nats per row).
double flow_nll_value(const RunState& state, const ad::Tensor& x);

ad::Checkpoint to_checkpoint(const RunState& state);
/// Restores parameters, optimizer moments and the step counter.
void restore_checkpoint(RunState& state, const ad::Checkpoint& ck);

// Run directories: config.resolved.ini, metrics.tsv, checkpoints/, and
// after evaluation summary.json and eval.tsv.

std::string metrics_header();
std::string metrics_row(const StepRecord& r);

/// Creates (or, with overwrite, clears) `dir` and writes the resolved config
/// and the metrics header.
void init_run_dir(const std::filesystem::path& dir, const RunConfig& cfg, bool overwrite);

/// Trains until state.step == until. With a run directory, appends metric
/// rows every log_interval steps (and at step 1), writes checkpoints every
/// checkpoint_interval steps and at the end, and on a numerical abort
/// leaves nan_dump.txt before rethrowing.
void train(RunState& state, std::uint64_t until, const std::optional<std::filesystem::path>& run_dir);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t step);
/// Highest-step checkpoint in the run directory, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& dir);

/// Reloads config and the latest checkpoint, and drops metric rows past it.
RunState resume_run(const std::filesystem::path& dir);

}  // namespace turbo::train
