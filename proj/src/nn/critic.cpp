#include "turbo/nn/critic.hpp"

#include <algorithm>

namespace turbo::nn {

std::string critic_mode_name(CriticMode m) { return m == CriticMode::Logistic ? "logistic" : "clipped"; }

void CriticSpec::validate() const {
  net.validate();
  if (net.output_width() != 1) throw std::invalid_argument("critic: output width must be 1");
  if (mode == CriticMode::Clipped && !(clip > 0.0)) throw std::invalid_argument("critic: clip bound must be positive");
}

Var critic_forward(const CriticSpec& spec, const std::vector<Var>& params, Var input) {
  Var out = mlp_forward(spec.net, params, input);
  return ad::reshape(out, {out.value().dim(0)});
}

void clip_params(ParamSet& params, double clip) {
  for (auto& t : params)
    for (double& v : t.data()) v = std::clamp(v, -clip, clip);
}

}  // namespace turbo::nn
