#include "turbo/oracle/objectives.hpp"

#include <cmath>
#include <fmt/format.h>

namespace turbo::oracle {

using prob::FiniteDist;

void IbnWeights::validate() const {
  if (!std::isfinite(lambda_b) || lambda_b < 0.0) throw std::invalid_argument("IbnWeights: lambda_B must be >= 0");
  if (!std::isfinite(lambda_info)) throw std::invalid_argument("IbnWeights: lambda_Info must be finite");
  if (!std::isfinite(lambda_s) || lambda_s < 0.0) throw std::invalid_argument("IbnWeights: lambda_S must be >= 0");
}

double turbo_direct(const TurboSystem& sys, const TurboWeights& w) {
  w.validate();
  const double enc_part = term_value(sys, Term::L_zt) + term_value(sys, Term::D_zt);
  if (w.lambda_d == 0.0) return enc_part;
  return enc_part + w.lambda_d * (term_value(sys, Term::L_xh) + term_value(sys, Term::D_xh));
}

double turbo_reverse(const TurboSystem& sys, const TurboWeights& w) {
  w.validate();
  const double dec_part = term_value(sys, Term::L_xt) + term_value(sys, Term::D_xt);
  if (w.lambda_r == 0.0) return dec_part;
  return dec_part + w.lambda_r * (term_value(sys, Term::L_zh) + term_value(sys, Term::D_zh));
}

double turbo_total(const TurboSystem& sys, const TurboWeights& w) {
  const double direct = turbo_direct(sys, w);
  if (w.lambda_t == 0.0) return direct;
  return direct + w.lambda_t * turbo_reverse(sys, w);
}

BottleneckTerms bottleneck_terms(const TurboSystem& sys) {
  const SystemMarginals m = system_marginals(sys);
  BottleneckTerms t;
  for (std::size_t x = 0; x < sys.n_x(); ++x) {
    if (m.p_x[x] == 0.0) continue;
    const auto row = sys.encoder().row(x);
    t.conditional_prior_kld += m.p_x[x] * prob::kld(FiniteDist({row.begin(), row.end()}), m.p_z);
  }
  t.marginal_prior_kld = prob::kld(m.q_tilde, m.p_z);
  t.reconstruction = term_value(sys, Term::L_xh);
  t.reconstruction_kld = prob::kld(m.p_x, m.p_hat);
  return t;
}

double bibae_loss(const TurboSystem& sys, const IbnWeights& w) {
  w.validate();
  const BottleneckTerms t = bottleneck_terms(sys);
  return t.conditional_prior_kld - t.marginal_prior_kld + w.lambda_b * t.reconstruction +
         w.lambda_b * t.reconstruction_kld;
}

double bibae_loss_mi_form(const TurboSystem& sys, const IbnWeights& w) {
  w.validate();
  const double i_enc = prob::mutual_information(encoder_joint(sys));
  const double bound = -term_value(sys, Term::L_xh) - term_value(sys, Term::D_xh);
  return i_enc - w.lambda_b * bound;
}

double ibn_family_loss(const TurboSystem& sys, IbnVariant variant, const IbnWeights& w) {
  w.validate();
  const BottleneckTerms t = bottleneck_terms(sys);
  switch (variant) {
    case IbnVariant::VAE:
      return t.conditional_prior_kld + w.lambda_b * t.reconstruction;
    case IbnVariant::InfoVAE:
      return t.conditional_prior_kld - (1.0 - w.lambda_b * w.lambda_info) * t.marginal_prior_kld +
             w.lambda_b * t.reconstruction;
    case IbnVariant::VAEGAN:
      return t.conditional_prior_kld + w.lambda_b * t.reconstruction + w.lambda_b * t.reconstruction_kld;
  }
  throw std::invalid_argument("ibn_family_loss: unknown variant");
}

double sensitive_leakage(const prob::FiniteJointWithSensitive& js, const prob::StochasticKernel& encoder) {
  if (encoder.n_in() != js.n_x()) throw prob::DimensionMismatch("sensitive_leakage: encoder input size");
  const prob::FiniteJoint xs = js.joint_xs();
  // p(s, z~) = sum_x p(x, s) q(z~|x)
  std::vector<double> sz(js.n_s() * encoder.n_out(), 0.0);
  for (std::size_t x = 0; x < js.n_x(); ++x)
    for (std::size_t s = 0; s < js.n_s(); ++s) {
      const double w = xs(x, s);
      if (w == 0.0) continue;
      for (std::size_t z = 0; z < encoder.n_out(); ++z) sz[s * encoder.n_out() + z] += w * encoder(x, z);
    }
  return prob::mutual_information(prob::FiniteJoint(js.n_s(), encoder.n_out(), std::move(sz)));
}

double club_loss(const TurboSystem& sys, const prob::FiniteJointWithSensitive& js,
                 const prob::StochasticKernel& attacker, const IbnWeights& w) {
  if (js.n_x() != sys.n_x() || js.n_z() != sys.n_z()) {
    throw prob::DimensionMismatch("club_loss: sensitive joint alphabets differ from the system");
  }
  const prob::FiniteJoint xz = js.joint_xz();
  for (std::size_t i = 0; i < xz.data().size(); ++i) {
    if (std::abs(xz.data()[i] - sys.joint().data()[i]) > prob::kSumTolerance) {
      throw std::invalid_argument(
          fmt::format("club_loss: sensitive joint does not marginalize to p(x,z) at entry {}", i));
    }
  }
  if (attacker.n_in() != sys.n_z() || attacker.n_out() != js.n_s()) {
    throw prob::DimensionMismatch("club_loss: attacker must map Z to S");
  }
  const double base = bibae_loss(sys, w);
  if (w.lambda_s == 0.0) return base;
  return base + w.lambda_s * sensitive_leakage(js, sys.encoder());
}

double alae_term(const TurboSystem& sys) {
  const SystemMarginals m = system_marginals(sys);
  return prob::kld(m.q_tilde, m.q_hat);
}

double preset_loss(const TurboSystem& sys, Preset preset, const TurboWeights& w) {
  w.validate();
  if (preset == Preset::VAE_LIKE || preset == Preset::CUSTOM) {
    throw UnsupportedPreset(fmt::format("preset_loss: {} has no discrete form", preset_name(preset)));
  }
  if (preset == Preset::FLOW && !sys.decoder().is_permutation()) {
    throw UnsupportedPreset("preset_loss: FLOW needs a deterministic invertible (permutation) decoder");
  }
  const TermCoefficients c = preset_coefficients(preset, w);
  double total = 0.0;
  for (Term t : kAllTerms) {
    if (!c.is_active(t) || c[t] == 0.0) continue;
    total += c[t] * term_value(sys, t);
  }
  if (c.alae_active && c.alae != 0.0) total += c.alae * alae_term(sys);
  return total;
}

}  // namespace turbo::oracle
