#include "turbo/oracle/terms.hpp"

#include <fmt/format.h>

namespace turbo::oracle {

using prob::FiniteDist;
using prob::FiniteJoint;
using prob::StochasticKernel;

TurboSystem::TurboSystem(FiniteJoint joint, StochasticKernel encoder, StochasticKernel decoder)
    : joint_(std::move(joint)), encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  if (encoder_.n_in() != joint_.n_x() || encoder_.n_out() != joint_.n_z()) {
    throw prob::DimensionMismatch(fmt::format("TurboSystem: encoder is {}x{}, joint is {}x{}", encoder_.n_in(),
                                              encoder_.n_out(), joint_.n_x(), joint_.n_z()));
  }
  if (decoder_.n_in() != joint_.n_z() || decoder_.n_out() != joint_.n_x()) {
    throw prob::DimensionMismatch(fmt::format("TurboSystem: decoder is {}x{}, expected {}x{}", decoder_.n_in(),
                                              decoder_.n_out(), joint_.n_z(), joint_.n_x()));
  }
}

TurboSystem TurboSystem::transposed() const { return TurboSystem(joint_.transposed(), decoder_, encoder_); }

TurboSystem TurboSystem::with_encoder(StochasticKernel encoder) const {
  return TurboSystem(joint_, std::move(encoder), decoder_);
}

TurboSystem TurboSystem::with_decoder(StochasticKernel decoder) const {
  return TurboSystem(joint_, encoder_, std::move(decoder));
}

SystemMarginals system_marginals(const TurboSystem& sys) {
  auto [p_x, p_z] = prob::marginals(sys.joint());
  FiniteDist q_tilde = prob::push_forward(p_x, sys.encoder());
  FiniteDist p_tilde = prob::push_forward(p_z, sys.decoder());
  FiniteDist q_hat = prob::push_forward(p_tilde, sys.encoder());
  FiniteDist p_hat = prob::push_forward(q_tilde, sys.decoder());
  return {std::move(p_x), std::move(p_z), std::move(q_tilde), std::move(p_tilde), std::move(q_hat), std::move(p_hat)};
}

FiniteJoint encoder_joint(const TurboSystem& sys) {
  return prob::compose_joint(prob::marginals(sys.joint()).first, sys.encoder());
}

FiniteJoint decoder_joint(const TurboSystem& sys) {
  return prob::compose_joint(prob::marginals(sys.joint()).second, sys.decoder()).transposed();
}

double term_value(const TurboSystem& sys, Term t) {
  const auto [p_x, p_z] = prob::marginals(sys.joint());
  switch (t) {
    case Term::L_zt:
      // -E_{p(x,z)} log q(z|x)
      return prob::expected_neg_log(sys.joint().data(), sys.encoder());
    case Term::D_zt:
      return prob::kld(p_z, prob::push_forward(p_x, sys.encoder()));
    case Term::L_xh:
      // -E_{q(x,z)} log p(x|z); weights laid out (z, x) like the decoder.
      return prob::expected_neg_log(encoder_joint(sys).transposed().data(), sys.decoder());
    case Term::D_xh:
      return prob::kld(p_x, prob::push_forward(prob::push_forward(p_x, sys.encoder()), sys.decoder()));
    case Term::L_xt:
      return prob::expected_neg_log(sys.joint().transposed().data(), sys.decoder());
    case Term::D_xt:
      return prob::kld(p_x, prob::push_forward(p_z, sys.decoder()));
    case Term::L_zh:
      // -E_{p_theta(x,z)} log q(z|x); weights laid out (x, z) like the encoder.
      return prob::expected_neg_log(decoder_joint(sys).data(), sys.encoder());
    case Term::D_zh:
      return prob::kld(p_z, prob::push_forward(prob::push_forward(p_z, sys.decoder()), sys.encoder()));
  }
  throw std::logic_error("term_value: unknown term");
}

TermBreakdown eight_terms(const TurboSystem& sys) {
  TermBreakdown b;
  for (Term t : kAllTerms) b.terms[static_cast<int>(t)] = term_value(sys, t);
  b.i_true = prob::mutual_information(sys.joint());
  b.i_enc = prob::mutual_information(encoder_joint(sys));
  b.i_dec = prob::mutual_information(decoder_joint(sys));
  b.b_direct_enc = -b[Term::L_zt] - b[Term::D_zt];
  b.b_direct_dec = -b[Term::L_xh] - b[Term::D_xh];
  b.b_reverse_dec = -b[Term::L_xt] - b[Term::D_xt];
  b.b_reverse_enc = -b[Term::L_zh] - b[Term::D_zh];
  return b;
}

}  // namespace turbo::oracle
