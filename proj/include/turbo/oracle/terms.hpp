#pragma once

// Exact evaluation of the eight loss terms and the four mutual-information
// lower bounds on finite alphabets.

#include <array>

#include "turbo/core/terms.hpp"
#include "turbo/prob/finite.hpp"

namespace turbo::oracle {

/// Ground-truth joint p(x, z) with an encoder q(z|x) and a decoder p(x|z).
class TurboSystem {
 public:
  TurboSystem(prob::FiniteJoint joint, prob::StochasticKernel encoder, prob::StochasticKernel decoder);

  const prob::FiniteJoint& joint() const { return joint_; }
  const prob::StochasticKernel& encoder() const { return encoder_; }
  const prob::StochasticKernel& decoder() const { return decoder_; }
  std::size_t n_x() const { return joint_.n_x(); }
  std::size_t n_z() const { return joint_.n_z(); }

  /// Same system seen from the other side: joint transposed, encoder and
  /// decoder exchanged. Direct-path quantities of the result are the
  /// reverse-path quantities of this system.
  TurboSystem transposed() const;

  TurboSystem with_encoder(prob::StochasticKernel encoder) const;
  TurboSystem with_decoder(prob::StochasticKernel decoder) const;

 private:
  prob::FiniteJoint joint_;
  prob::StochasticKernel encoder_;
  prob::StochasticKernel decoder_;
};

/// True marginals and the one-pass (tilde) and round-trip (hat) pushforwards.
struct SystemMarginals {
  prob::FiniteDist p_x;
  prob::FiniteDist p_z;
  prob::FiniteDist q_tilde;  ///< p_x pushed through the encoder
  prob::FiniteDist p_tilde;  ///< p_z pushed through the decoder
  prob::FiniteDist q_hat;    ///< p_tilde pushed through the encoder
  prob::FiniteDist p_hat;    ///< q_tilde pushed through the decoder
};

SystemMarginals system_marginals(const TurboSystem& sys);

/// q(x, z) = p(x) q(z|x), rows x.
prob::FiniteJoint encoder_joint(const TurboSystem& sys);
/// p_theta(x, z) = p(z) p(x|z), rows x.
prob::FiniteJoint decoder_joint(const TurboSystem& sys);

/// A single term; only the marginals and kernels it needs are touched, so a
/// term whose expectation is finite can be evaluated even when another term
/// of the same system would raise a SupportError.
double term_value(const TurboSystem& sys, Term t);

struct TermBreakdown {
  std::array<double, kTermCount> terms{};
  double i_true = 0.0;  ///< I(X; Z)
  double i_enc = 0.0;   ///< I_phi(X; Z~), under p(x) q(z|x)
  double i_dec = 0.0;   ///< I_theta(X~; Z), under p(z) p(x|z)
  double b_direct_enc = 0.0;   ///< -L_zt - D_zt <= I(X; Z)
  double b_direct_dec = 0.0;   ///< -L_xh - D_xh <= I_phi(X; Z~)
  double b_reverse_dec = 0.0;  ///< -L_xt - D_xt <= I(X; Z)
  double b_reverse_enc = 0.0;  ///< -L_zh - D_zh <= I_theta(X~; Z)

  double operator[](Term t) const { return terms[static_cast<int>(t)]; }
};

TermBreakdown eight_terms(const TurboSystem& sys);

}  // namespace turbo::oracle
