#pragma once

// Composite objectives on exact finite systems: the two-way paths, the
// bottleneck family, and the named models expressed as term subsets.

#include "turbo/core/terms.hpp"
#include "turbo/oracle/terms.hpp"

namespace turbo::oracle {

struct IbnWeights {
  double lambda_b = 1.0;
  double lambda_info = 1.0;
  double lambda_s = 0.0;

  void validate() const;
};

/// L_zt + D_zt + lambda_D (L_xh + D_xh).
double turbo_direct(const TurboSystem& sys, const TurboWeights& w);
/// L_xt + D_xt + lambda_R (L_zh + D_zh).
double turbo_reverse(const TurboSystem& sys, const TurboWeights& w);
/// direct + lambda_T reverse.
double turbo_total(const TurboSystem& sys, const TurboWeights& w);

/// The four expanded bottleneck terms, before weighting.
struct BottleneckTerms {
  double conditional_prior_kld = 0.0;  ///< E_p(x) KL(q(z|x) || p(z))
  double marginal_prior_kld = 0.0;     ///< KL(q~(z) || p(z))
  double reconstruction = 0.0;         ///< -E_q(x,z) log p(x|z) (= L_xh)
  double reconstruction_kld = 0.0;     ///< KL(p(x) || p^(x)) (= D_xh)
};

BottleneckTerms bottleneck_terms(const TurboSystem& sys);

/// Expanded form: T1 - T2 + lambda_B (T3 + T4).
double bibae_loss(const TurboSystem& sys, const IbnWeights& w);
/// Mutual-information form: I_phi(X; Z~) - lambda_B * (-L_xh - D_xh).
double bibae_loss_mi_form(const TurboSystem& sys, const IbnWeights& w);

enum class IbnVariant { VAE, InfoVAE, VAEGAN };

double ibn_family_loss(const TurboSystem& sys, IbnVariant variant, const IbnWeights& w);

/// I(S; Z~) where Z~ is produced from X by the encoder: the exact value of
/// the privacy-leakage term.
double sensitive_leakage(const prob::FiniteJointWithSensitive& js, const prob::StochasticKernel& encoder);

/// bibae_loss + lambda_S I(S; Z~). The attacker kernel is accepted so the
/// signature carries the attacker's parameters, but the exact leakage is
/// computed directly and the attacker does not enter the value.
double club_loss(const TurboSystem& sys, const prob::FiniteJointWithSensitive& js,
                 const prob::StochasticKernel& attacker, const IbnWeights& w);

/// KL(q~(z) || q^(z)).
double alae_term(const TurboSystem& sys);

class UnsupportedPreset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sum of the preset's active terms with their coefficients. FLOW requires a
/// permutation decoder and evaluates D_xt only. VAE_LIKE and CUSTOM have no
/// discrete form here and throw UnsupportedPreset.
double preset_loss(const TurboSystem& sys, Preset preset, const TurboWeights& w);

}  // namespace turbo::oracle
