#include "turbo/oracle/saturation.hpp"

#include <cmath>

#include "turbo/oracle/random_system.hpp"

namespace turbo::oracle {

std::string_view bound_name(BoundKind b) {
  switch (b) {
    case BoundKind::DirectEnc: return "direct_enc";
    case BoundKind::DirectDec: return "direct_dec";
    case BoundKind::ReverseDec: return "reverse_dec";
    case BoundKind::ReverseEnc: return "reverse_enc";
  }
  return "?";
}

double bound_value(const TermBreakdown& t, BoundKind b) {
  switch (b) {
    case BoundKind::DirectEnc: return t.b_direct_enc;
    case BoundKind::DirectDec: return t.b_direct_dec;
    case BoundKind::ReverseDec: return t.b_reverse_dec;
    case BoundKind::ReverseEnc: return t.b_reverse_enc;
  }
  return 0.0;
}

namespace {

bool perturbs_encoder(BoundKind b) { return b == BoundKind::DirectEnc || b == BoundKind::ReverseEnc; }

TurboSystem with_kernel(const TurboSystem& sys, BoundKind b, prob::StochasticKernel k) {
  return perturbs_encoder(b) ? sys.with_encoder(std::move(k)) : sys.with_decoder(std::move(k));
}

double target(const TurboSystem& sys, const TermBreakdown& t, BoundKind b) {
  const auto [p_x, p_z] = prob::marginals(sys.joint());
  switch (b) {
    case BoundKind::DirectEnc: return t.i_true - prob::entropy(p_z);
    case BoundKind::DirectDec: return t.i_enc - prob::entropy(p_x);
    case BoundKind::ReverseDec: return t.i_true - prob::entropy(p_x);
    case BoundKind::ReverseEnc: return t.i_dec - prob::entropy(p_z);
  }
  return 0.0;
}

}  // namespace

prob::StochasticKernel optimal_kernel(const TurboSystem& sys, BoundKind which) {
  using prob::Conditioning;
  switch (which) {
    case BoundKind::DirectEnc: return prob::conditional_from_joint(sys.joint(), Conditioning::ZGivenX);
    case BoundKind::DirectDec: return prob::conditional_from_joint(encoder_joint(sys), Conditioning::XGivenZ);
    case BoundKind::ReverseDec: return prob::conditional_from_joint(sys.joint(), Conditioning::XGivenZ);
    case BoundKind::ReverseEnc: return prob::conditional_from_joint(decoder_joint(sys), Conditioning::ZGivenX);
  }
  throw std::logic_error("optimal_kernel: unknown bound");
}

SaturationReport saturation_check(const prob::FiniteJoint& joint, BoundKind which, std::size_t trials,
                                  std::uint64_t seed, const SaturationOptions& options) {
  Rng rng(seed);
  const std::size_t n_x = joint.n_x();
  const std::size_t n_z = joint.n_z();
  TurboSystem sys(joint, random_kernel(n_x, n_z, rng), random_kernel(n_z, n_x, rng));

  prob::StochasticKernel best = optimal_kernel(sys, which);
  if (options.corrupt_optimum) {
    const auto& ref = perturbs_encoder(which) ? sys.encoder() : sys.decoder();
    best = mix_kernels(best, random_kernel(ref.n_in(), ref.n_out(), rng), 0.5);
  }
  sys = with_kernel(sys, which, best);
  const TermBreakdown at_best = eight_terms(sys);

  SaturationReport report;
  report.which = which;
  report.trials = trials;
  report.optimum = bound_value(at_best, which);
  report.identity_target = target(sys, at_best, which);
  report.identity_residual = std::abs(report.optimum - report.identity_target);

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const double w = kPerturbationWeights[trial % kPerturbationWeights.size()];
    prob::StochasticKernel k = mix_kernels(best, random_kernel(best.n_in(), best.n_out(), rng), w);
    const double value = bound_value(eight_terms(with_kernel(sys, which, k)), which);
    report.max_perturbed = std::max(report.max_perturbed, value);
    report.max_excess = std::max(report.max_excess, value - report.optimum);
    if (value > report.optimum + kSaturationTolerance) {
      report.violations.push_back({trial, w, value, std::move(k)});
    }
  }
  return report;
}

}  // namespace turbo::oracle
