#include "turbo/core/terms.hpp"

#include <cmath>
#include <stdexcept>

namespace turbo {

namespace {
constexpr std::array<std::string_view, kTermCount> kTermNames = {"L_zt", "D_zt", "L_xh", "D_xh",
                                                                "L_xt", "D_xt", "L_zh", "D_zh"};

constexpr std::array<std::pair<Preset, std::string_view>, 10> kPresetNames = {{
    {Preset::AAE, "AAE"},
    {Preset::GAN, "GAN"},
    {Preset::WGAN, "WGAN"},
    {Preset::PIX2PIX, "PIX2PIX"},
    {Preset::CYCLEGAN, "CYCLEGAN"},
    {Preset::FLOW, "FLOW"},
    {Preset::ALAE, "ALAE"},
    {Preset::TURBO_FULL, "TURBO_FULL"},
    {Preset::VAE_LIKE, "VAE_LIKE"},
    {Preset::CUSTOM, "CUSTOM"},
}};
}  // namespace

std::string_view term_name(Term t) { return kTermNames[static_cast<int>(t)]; }

std::optional<Term> parse_term(std::string_view name) {
  for (std::size_t i = 0; i < kTermCount; ++i)
    if (kTermNames[i] == name) return static_cast<Term>(i);
  return std::nullopt;
}

void TurboWeights::validate() const {
  for (double v : {lambda_d, lambda_r, lambda_t}) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("TurboWeights: weights must be finite and >= 0");
  }
}

std::string_view preset_name(Preset p) {
  for (const auto& [preset, name] : kPresetNames)
    if (preset == p) return name;
  return "?";
}

std::optional<Preset> parse_preset(std::string_view name) {
  for (const auto& [preset, n] : kPresetNames)
    if (n == name) return preset;
  return std::nullopt;
}

TermCoefficients turbo_full_coefficients(const TurboWeights& w) {
  TermCoefficients c;
  c.set(Term::L_zt, 1.0);
  c.set(Term::D_zt, 1.0);
  c.set(Term::L_xh, w.lambda_d);
  c.set(Term::D_xh, w.lambda_d);
  c.set(Term::L_xt, w.lambda_t);
  c.set(Term::D_xt, w.lambda_t);
  c.set(Term::L_zh, w.lambda_t * w.lambda_r);
  c.set(Term::D_zh, w.lambda_t * w.lambda_r);
  return c;
}

TermCoefficients preset_coefficients(Preset p, const TurboWeights& w) {
  TermCoefficients c;
  switch (p) {
    case Preset::AAE:
      c.set(Term::D_zt, 1.0);
      c.set(Term::L_xh, w.lambda_d);
      break;
    case Preset::GAN:
    case Preset::WGAN:
    case Preset::FLOW:
      c.set(Term::D_xt, 1.0);
      break;
    case Preset::PIX2PIX:
      c.set(Term::L_xt, 1.0);
      c.set(Term::D_xt, 1.0);
      break;
    case Preset::CYCLEGAN:
      c.set(Term::D_zt, 1.0);
      c.set(Term::L_xh, w.lambda_d);
      c.set(Term::D_xt, w.lambda_t);
      c.set(Term::L_zh, w.lambda_t * w.lambda_r);
      break;
    case Preset::ALAE:
      c.set(Term::L_zh, 1.0);
      c.alae = 1.0;
      c.alae_active = true;
      break;
    case Preset::TURBO_FULL:
      return turbo_full_coefficients(w);
    case Preset::VAE_LIKE:
      // lambda_D plays the role of the beta weight on reconstruction.
      c.set(Term::L_xh, w.lambda_d);
      c.vae_prior = 1.0;
      c.vae_prior_active = true;
      break;
    case Preset::CUSTOM:
      throw std::invalid_argument("CUSTOM has no fixed coefficient table");
  }
  return c;
}

}  // namespace turbo
