#pragma once

// The eight loss terms of the two-way objective, the weights that combine
// them, and the per-model coefficient tables shared by the exact oracle and
// the trainer.

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace turbo {

/// Direct path: L_zt, D_zt (encoder space), L_xh, D_xh (reconstruction).
/// Reverse path: L_xt, D_xt (decoder space), L_zh, D_zh (reconstruction).
enum class Term : int { L_zt = 0, D_zt, L_xh, D_xh, L_xt, D_xt, L_zh, D_zh };

inline constexpr std::size_t kTermCount = 8;
inline constexpr std::array<Term, kTermCount> kAllTerms = {Term::L_zt, Term::D_zt, Term::L_xh, Term::D_xh,
                                                           Term::L_xt, Term::D_xt, Term::L_zh, Term::D_zh};

std::string_view term_name(Term t);
std::optional<Term> parse_term(std::string_view name);

inline constexpr bool is_divergence(Term t) { return static_cast<int>(t) % 2 == 1; }
inline constexpr bool is_direct(Term t) { return static_cast<int>(t) < 4; }
/// L_zt and L_xt compare outputs against the paired sample; the other two
/// cross-entropies are round-trip self-reconstructions.
inline constexpr bool needs_pairing(Term t) { return t == Term::L_zt || t == Term::L_xt; }

struct TurboWeights {
  double lambda_d = 1.0;
  double lambda_r = 1.0;
  double lambda_t = 1.0;

  /// Throws std::invalid_argument unless all weights are finite and >= 0.
  void validate() const;
};

enum class Preset { AAE, GAN, WGAN, PIX2PIX, CYCLEGAN, FLOW, ALAE, TURBO_FULL, VAE_LIKE, CUSTOM };

std::string_view preset_name(Preset p);
std::optional<Preset> parse_preset(std::string_view name);

/// Coefficient of each term in a model's loss. `active` is the term mask: a
/// term can be active with a zero coefficient (CUSTOM), in which case it is
/// still computed and logged.
struct TermCoefficients {
  std::array<double, kTermCount> weight{};
  std::array<bool, kTermCount> active{};
  /// KL(q~ || q^), the latent-marginal term of ALAE.
  double alae = 0.0;
  bool alae_active = false;
  /// Closed-form Gaussian KL to the standard normal prior (VAE_LIKE only).
  double vae_prior = 0.0;
  bool vae_prior_active = false;

  double operator[](Term t) const { return weight[static_cast<int>(t)]; }
  bool is_active(Term t) const { return active[static_cast<int>(t)]; }
  void set(Term t, double w) {
    weight[static_cast<int>(t)] = w;
    active[static_cast<int>(t)] = true;
  }
};

/// The exact term subset and weighting for each named model. CUSTOM has no
/// fixed table and throws std::invalid_argument.
TermCoefficients preset_coefficients(Preset p, const TurboWeights& w);

/// Coefficients of the full objective: direct + lambda_T * reverse.
TermCoefficients turbo_full_coefficients(const TurboWeights& w);

}  // namespace turbo
