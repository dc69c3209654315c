#include "turbo/loss/surrogates.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace turbo::loss {

std::string norm_name(Norm n) { return n == Norm::L2 ? "l2" : "l1"; }

Norm parse_norm(const std::string& s) {
  if (s == "l2") return Norm::L2;
  if (s == "l1") return Norm::L1;
  throw std::invalid_argument(fmt::format("unknown norm '{}' (expected l1 or l2)", s));
}

void ReconConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
}

std::string surrogate_name(AdvSurrogate s) { return s == AdvSurrogate::Logistic ? "logistic" : "wasserstein"; }

AdvSurrogate parse_surrogate(const std::string& s) {
  if (s == "logistic") return AdvSurrogate::Logistic;
  if (s == "wasserstein") return AdvSurrogate::Wasserstein;
  throw std::invalid_argument(fmt::format("unknown surrogate '{}' (expected logistic or wasserstein)", s));
}

void AdvConfig::validate() const {
  if (critic_steps < 1) throw std::invalid_argument("critic_steps must be >= 1");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
}

namespace {
void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ad::ShapeError(fmt::format("{}: shapes {} and {} differ", what, ad::to_string(a.shape()),
                                     ad::to_string(b.shape())));
  }
}

std::size_t rows(const Var& v) { return v.value().rank() == 0 ? 1 : v.value().dim(0); }
}  // namespace

Var recon_loss(const ReconConfig& cfg, Var target, Var output) {
  require_same_shape(target, output, "recon_loss");
  Var diff = output - target;
  Var per = cfg.norm == Norm::L2 ? ad::square(diff) : ad::abs(diff);
  return (cfg.alpha / static_cast<double>(rows(target))) * ad::sum(per);
}

Var adv_critic_from_scores(const AdvConfig& cfg, Var real_scores, Var fake_scores) {
  if (cfg.surrogate == AdvSurrogate::Wasserstein) return ad::mean(fake_scores) - ad::mean(real_scores);
  return 0.5 * (ad::mean(ad::softplus(-real_scores)) + ad::mean(ad::softplus(fake_scores)));
}

Var adv_generator_from_scores(const AdvConfig& cfg, Var fake_scores) {
  if (cfg.surrogate == AdvSurrogate::Wasserstein) return -ad::mean(fake_scores);
  return ad::mean(ad::softplus(-fake_scores));
}

Var adv_loss_critic(const AdvConfig& cfg, const nn::CriticSpec& critic, const std::vector<Var>& critic_params,
                    Var real_batch, Var fake_batch) {
  if (real_batch.value().rank() != 2 || fake_batch.value().rank() != 2 ||
      real_batch.value().dim(1) != fake_batch.value().dim(1)) {
    throw ad::ShapeError("adv_loss_critic: real and fake batches must have equal width");
  }
  return adv_critic_from_scores(cfg, nn::critic_forward(critic, critic_params, real_batch),
                                nn::critic_forward(critic, critic_params, fake_batch));
}

Var adv_loss_generator(const AdvConfig& cfg, const nn::CriticSpec& critic, const std::vector<Var>& critic_params,
                       Var fake_batch) {
  return adv_generator_from_scores(cfg, nn::critic_forward(critic, critic_params, fake_batch));
}

Var flow_nll(const nn::CouplingFlowSpec& spec, const std::vector<Var>& params, Var x) {
  const nn::FlowOutput inv = nn::coupling_inverse(spec, params, x);
  const double d = static_cast<double>(spec.dim);
  const double log_norm = 0.5 * d * std::log(2.0 * std::numbers::pi);
  Var per_row = 0.5 * ad::sum(ad::square(inv.value), 1) - inv.log_det;
  return ad::mean(per_row) + log_norm;
}

Var gaussian_kl_standard(Var mean, Var logvar) {
  require_same_shape(mean, logvar, "gaussian_kl_standard");
  Var per = ad::square(mean) + ad::exp(logvar) - logvar - 1.0;
  return (0.5 / static_cast<double>(rows(mean))) * ad::sum(per);
}

}  // namespace turbo::loss
