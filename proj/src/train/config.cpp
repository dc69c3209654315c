#include "turbo/train/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "turbo/util/format.hpp"

namespace turbo::train {

namespace pt = boost::property_tree;

namespace {

const std::array<Term, 4> kReconTerms = {Term::L_zt, Term::L_xh, Term::L_xt, Term::L_zh};

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = [] {
    std::map<std::string, std::set<std::string>> m{
        {"run",
         {"preset", "seed", "data_seed", "eval_seed", "steps", "batch_size", "log_interval", "checkpoint_interval",
          "eval_samples", "mode_radius"}},
        {"data",
         {"family", "dim_x", "dim_z", "noise", "mixing", "offset", "latent_scale", "moon_noise", "rotation",
          "moon_scale", "modes", "radius", "mode_std", "paired", "normalize"}},
        {"weights", {"lambda_d", "lambda_r", "lambda_t"}},
        {"terms", {"L_zt", "D_zt", "L_xh", "D_xh", "L_xt", "D_xt", "L_zh", "D_zh", "alae", "vae_prior"}},
        {"network", {"hidden", "activation", "critic_hidden", "critic_activation", "noise_dim"}},
        {"flow", {"blocks", "hidden", "activation", "scale_bound"}},
        {"optimizer", {"kind", "lr", "beta1", "beta2", "eps"}},
        {"critic_optimizer", {"kind", "lr", "beta1", "beta2", "eps"}},
        {"adversarial", {"surrogate", "critic_steps", "clip"}},
        {"recon", {"norm", "alpha"}},
    };
    for (Term t : kReconTerms) m[fmt::format("recon_{}", term_name(t))] = {"norm", "alpha"};
    return m;
  }();
  return s;
}

/// Reads typed values out of one section, tagging errors with section.key.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string raw(const std::string& key) const { return std::string(trim(tree_->get<std::string>(key))); }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(fmt::format("{}.{}: {}", name_, key, msg));
  }

  template <typename F>
  auto with(const std::string& key, F parse) const -> decltype(parse(std::string{})) {
    try {
      return parse(raw(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

  void get(const std::string& key, std::string& out) const {
    if (has(key)) out = raw(key);
  }
  void get(const std::string& key, double& out) const {
    if (has(key)) out = with(key, [](const std::string& s) { return parse_double(s); });
  }
  void get(const std::string& key, std::uint64_t& out) const {
    if (!has(key)) return;
    const long long v = with(key, [](const std::string& s) { return parse_int(s); });
    if (v < 0) fail(key, "must be non-negative");
    out = static_cast<std::uint64_t>(v);
  }
  void get(const std::string& key, std::size_t& out, int) const {
    std::uint64_t v = out;
    get(key, v);
    out = static_cast<std::size_t>(v);
  }
  void get(const std::string& key, bool& out) const {
    if (!has(key)) return;
    const std::string v = raw(key);
    if (v == "true" || v == "1" || v == "yes") {
      out = true;
    } else if (v == "false" || v == "0" || v == "no") {
      out = false;
    } else {
      fail(key, fmt::format("expected true or false, got '{}'", v));
    }
  }
  void get(const std::string& key, std::vector<double>& out) const {
    if (!has(key)) return;
    out.clear();
    for (const auto& tok : split_ws(raw(key))) out.push_back(with(key, [&](const std::string&) {
      return parse_double(tok);
    }));
  }
  void get(const std::string& key, std::vector<std::size_t>& out) const {
    if (!has(key)) return;
    out.clear();
    for (const auto& tok : split_ws(raw(key))) {
      const long long v = with(key, [&](const std::string&) { return parse_int(tok); });
      if (v < 1) fail(key, "widths must be >= 1");
      out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) fail(key, "needs at least one width");
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
};

std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line)) {
    const auto pos = line.find_first_of("#;");
    if (pos != std::string::npos) line.erase(pos);
    out += line;
    out += '\n';
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + format_exact(v[i]);
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? " " : "", v[i]);
  return out;
}

bool has_adversarial(const TermCoefficients& c) {
  for (Term t : kAllTerms)
    if (is_divergence(t) && c.is_active(t)) return true;
  return c.alae_active;
}

void read_optimizer(const Section& s, ad::OptimizerConfig& o) {
  if (s.has("kind")) o.kind = s.with("kind", [](const std::string& v) { return ad::parse_optimizer(v); });
  s.get("lr", o.lr);
  s.get("beta1", o.beta1);
  s.get("beta2", o.beta2);
  s.get("eps", o.eps);
}

void read_recon(const Section& s, loss::ReconConfig& r) {
  if (s.has("norm")) r.norm = s.with("norm", [](const std::string& v) { return loss::parse_norm(v); });
  s.get("alpha", r.alpha);
}

template <typename F>
void field(const std::string& name, F check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", name, e.what()));
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(strip_comments(text));
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  for (const auto& [name, sec] : tree) {
    auto it = schema().find(name);
    if (it == schema().end()) {
      if (sec.empty() && !sec.data().empty()) throw ConfigError(fmt::format("{}: key outside any section", name));
      throw ConfigError(fmt::format("{}: unknown section", name));
    }
    for (const auto& [key, _] : sec)
      if (!it->second.count(key)) throw ConfigError(fmt::format("{}.{}: unknown key", name, key));
  }
  auto section = [&](const std::string& name) {
    auto it = tree.find(name);
    return Section(it == tree.not_found() ? nullptr : &it->second, name);
  };

  RunConfig c;
  const Section run = section("run");
  if (!run.has("preset")) throw ConfigError("run.preset: required");
  c.preset = run.with("preset", [](const std::string& v) {
    auto p = parse_preset(v);
    if (!p) throw std::invalid_argument(fmt::format("unknown preset '{}'", v));
    return *p;
  });
  run.get("seed", c.seed);
  run.get("data_seed", c.data_seed);
  run.get("eval_seed", c.eval_seed);
  run.get("steps", c.steps);
  run.get("batch_size", c.batch_size, 0);
  run.get("log_interval", c.log_interval);
  run.get("checkpoint_interval", c.checkpoint_interval);
  run.get("eval_samples", c.eval_samples, 0);
  run.get("mode_radius", c.mode_radius);

  const Section d = section("data");
  if (d.has("family")) c.data.family = d.with("family", [](const std::string& v) { return data::parse_family(v); });
  c.data.paired = c.data.family != data::Family::GaussianRing;
  if (c.data.family == data::Family::GaussianRing) c.data.noise = 0.0;
  d.get("dim_x", c.data.dim_x, 0);
  d.get("dim_z", c.data.dim_z, 0);
  if (c.data.family == data::Family::TwoMoons) c.data.noise = 0.05;
  d.get("noise", c.data.noise);
  d.get("mixing", c.data.mixing);
  d.get("offset", c.data.offset);
  d.get("latent_scale", c.data.latent_scale);
  d.get("moon_noise", c.data.moon_noise);
  d.get("rotation", c.data.rotation);
  d.get("moon_scale", c.data.moon_scale);
  d.get("modes", c.data.modes, 0);
  d.get("radius", c.data.radius);
  d.get("mode_std", c.data.mode_std);
  d.get("paired", c.data.paired);
  d.get("normalize", c.data.normalize);

  const Section w = section("weights");
  w.get("lambda_d", c.weights.lambda_d);
  w.get("lambda_r", c.weights.lambda_r);
  w.get("lambda_t", c.weights.lambda_t);

  const Section terms = section("terms");
  if (c.preset == Preset::CUSTOM) {
    for (Term t : kAllTerms) {
      const std::string key(term_name(t));
      if (!terms.has(key)) continue;
      double v = 0.0;
      terms.get(key, v);
      c.coefficients.set(t, v);
    }
    if (terms.has("alae")) {
      terms.get("alae", c.coefficients.alae);
      c.coefficients.alae_active = true;
    }
    if (terms.has("vae_prior")) {
      terms.get("vae_prior", c.coefficients.vae_prior);
      c.coefficients.vae_prior_active = true;
    }
  } else if (tree.find("terms") != tree.not_found()) {
    throw ConfigError(fmt::format("terms: the term mask of {} is fixed; use preset = CUSTOM for an explicit mask",
                                  preset_name(c.preset)));
  }

  const Section net = section("network");
  net.get("hidden", c.hidden);
  if (net.has("activation"))
    c.activation = net.with("activation", [](const std::string& v) { return nn::parse_activation(v); });
  net.get("critic_hidden", c.critic_hidden);
  if (net.has("critic_activation"))
    c.critic_activation = net.with("critic_activation", [](const std::string& v) { return nn::parse_activation(v); });
  net.get("noise_dim", c.noise_dim, 0);

  const Section fl = section("flow");
  fl.get("blocks", c.flow.blocks, 0);
  fl.get("hidden", c.flow.hidden);
  if (fl.has("activation"))
    c.flow.activation = fl.with("activation", [](const std::string& v) { return nn::parse_activation(v); });
  fl.get("scale_bound", c.flow.scale_bound);

  const Section adv = section("adversarial");
  c.adversarial.surrogate =
      c.preset == Preset::WGAN ? loss::AdvSurrogate::Wasserstein : loss::AdvSurrogate::Logistic;
  if (adv.has("surrogate"))
    c.adversarial.surrogate = adv.with("surrogate", [](const std::string& v) { return loss::parse_surrogate(v); });
  c.adversarial.critic_steps = c.adversarial.surrogate == loss::AdvSurrogate::Wasserstein ? 5 : 1;
  adv.get("critic_steps", c.adversarial.critic_steps, 0);
  adv.get("clip", c.adversarial.clip);

  if (c.preset != Preset::CUSTOM) c.coefficients = preset_coefficients(c.preset, c.weights);

  // Adversarial runs default to beta1 = 0.5 on both optimizers.
  const bool adversarial = has_adversarial(c.coefficients);
  c.optimizer.beta1 = adversarial ? 0.5 : 0.9;
  c.critic_optimizer.beta1 = adversarial ? 0.5 : 0.9;
  c.critic_optimizer.lr = 2e-3;
  read_optimizer(section("optimizer"), c.optimizer);
  read_optimizer(section("critic_optimizer"), c.critic_optimizer);

  loss::ReconConfig base;
  read_recon(section("recon"), base);
  c.recon.fill(base);
  for (Term t : kReconTerms) read_recon(section(fmt::format("recon_{}", term_name(t))), c.recon[static_cast<int>(t)]);

  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const RunConfig& c) {
  if (c.steps < 1) throw ConfigError("run.steps: must be >= 1");
  if (c.batch_size < 1) throw ConfigError("run.batch_size: must be >= 1");
  if (c.log_interval < 1) throw ConfigError("run.log_interval: must be >= 1");
  if (c.checkpoint_interval < 1) throw ConfigError("run.checkpoint_interval: must be >= 1");
  if (c.eval_samples < 1) throw ConfigError("run.eval_samples: must be >= 1");
  if (!(c.mode_radius > 0.0)) throw ConfigError("run.mode_radius: must be positive");

  field("data", [&] {
    data::DatasetSpec d = c.data;
    d.validate();
  });
  for (const auto& [key, v] : {std::pair{"lambda_d", c.weights.lambda_d}, std::pair{"lambda_r", c.weights.lambda_r},
                                std::pair{"lambda_t", c.weights.lambda_t}}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(fmt::format("weights.{}: must be finite and >= 0", key));
  }
  field("optimizer", [&] { c.optimizer.validate(); });
  field("critic_optimizer", [&] { c.critic_optimizer.validate(); });
  field("adversarial", [&] { c.adversarial.validate(); });
  for (Term t : kReconTerms) field(fmt::format("recon_{}", term_name(t)), [&] { c.recon_for(t).validate(); });
  field("network.hidden", [&] { nn::make_mlp(1, c.hidden, 1); });
  field("network.critic_hidden", [&] { nn::make_mlp(1, c.critic_hidden, 1); });

  bool any = c.coefficients.alae_active || c.coefficients.vae_prior_active;
  for (Term t : kAllTerms) {
    const double w = c.coefficients[t];
    if (c.coefficients.is_active(t)) {
      any = true;
      if (!std::isfinite(w) || w < 0.0)
        throw ConfigError(fmt::format("terms.{}: coefficient must be finite and >= 0", term_name(t)));
    }
    if (c.coefficients.is_active(t) && needs_pairing(t) && !c.data.paired) {
      throw ConfigError(fmt::format("terms.{}: paired reconstruction term is active but data.paired = false",
                                    term_name(t)));
    }
  }
  if (!any) throw ConfigError("terms: no active term");
  if (c.coefficients.alae_active && !(c.coefficients.alae >= 0.0)) throw ConfigError("terms.alae: must be >= 0");
  if (c.coefficients.alae_active && (c.coefficients.is_active(Term::D_zt) || c.coefficients.is_active(Term::D_zh)))
    throw ConfigError("terms.alae: the latent critic cannot serve alae together with D_zt or D_zh");
  if (c.coefficients.vae_prior_active && !(c.coefficients.vae_prior >= 0.0))
    throw ConfigError("terms.vae_prior: must be >= 0");

  if (c.preset == Preset::FLOW) {
    if (c.data.dim_x != c.data.dim_z) throw ConfigError("data.dim_z: FLOW needs dim_z = dim_x");
    field("flow", [&] {
      nn::CouplingFlowSpec f = c.flow;
      f.dim = c.data.dim_x;
      f.validate();
    });
    if (c.noise_dim != 0) throw ConfigError("network.noise_dim: FLOW takes no extra noise input");
  }
}

std::string resolved_ini(const RunConfig& c) {
  std::string o;
  auto line = [&](const std::string& k, const std::string& v) { o += fmt::format("{} = {}\n", k, v); };
  auto recon = [&](const loss::ReconConfig& r) {
    line("norm", loss::norm_name(r.norm));
    line("alpha", format_exact(r.alpha));
  };
  auto optim = [&](const ad::OptimizerConfig& p) {
    line("kind", ad::optimizer_name(p.kind));
    line("lr", format_exact(p.lr));
    line("beta1", format_exact(p.beta1));
    line("beta2", format_exact(p.beta2));
    line("eps", format_exact(p.eps));
  };
  data::DatasetSpec d = c.data;
  d.validate();

  o += "[run]\n";
  line("preset", std::string(preset_name(c.preset)));
  line("seed", std::to_string(c.seed));
  line("data_seed", std::to_string(c.data_seed));
  line("eval_seed", std::to_string(c.eval_seed));
  line("steps", std::to_string(c.steps));
  line("batch_size", std::to_string(c.batch_size));
  line("log_interval", std::to_string(c.log_interval));
  line("checkpoint_interval", std::to_string(c.checkpoint_interval));
  line("eval_samples", std::to_string(c.eval_samples));
  line("mode_radius", format_exact(c.mode_radius));

  o += "\n[data]\n";
  line("family", data::family_name(d.family));
  line("dim_x", std::to_string(d.dim_x));
  line("dim_z", std::to_string(d.dim_z));
  line("noise", format_exact(d.noise));
  if (d.family == data::Family::LinearGaussian) {
    line("mixing", join(d.mixing));
    line("offset", join(d.offset));
    line("latent_scale", join(d.latent_scale));
  }
  if (d.family == data::Family::TwoMoons) {
    line("moon_noise", format_exact(d.moon_noise));
    line("rotation", format_exact(d.rotation));
    line("moon_scale", join(d.moon_scale));
  }
  if (d.family == data::Family::GaussianRing) {
    line("modes", std::to_string(d.modes));
    line("radius", format_exact(d.radius));
    line("mode_std", format_exact(d.mode_std));
  }
  line("paired", d.paired ? "true" : "false");
  line("normalize", d.normalize ? "true" : "false");

  o += "\n[weights]\n";
  line("lambda_d", format_exact(c.weights.lambda_d));
  line("lambda_r", format_exact(c.weights.lambda_r));
  line("lambda_t", format_exact(c.weights.lambda_t));

  o += c.preset == Preset::CUSTOM ? "\n[terms]\n" : "\n# resolved term mask (fixed by the preset)\n";
  const std::string prefix = c.preset == Preset::CUSTOM ? "" : "# ";
  for (Term t : kAllTerms)
    if (c.coefficients.is_active(t)) o += prefix + fmt::format("{} = {}\n", term_name(t), format_exact(c.coefficients[t]));
  if (c.coefficients.alae_active) o += prefix + fmt::format("alae = {}\n", format_exact(c.coefficients.alae));
  if (c.coefficients.vae_prior_active)
    o += prefix + fmt::format("vae_prior = {}\n", format_exact(c.coefficients.vae_prior));

  o += "\n[network]\n";
  line("hidden", join(c.hidden));
  line("activation", nn::activation_name(c.activation));
  line("critic_hidden", join(c.critic_hidden));
  line("critic_activation", nn::activation_name(c.critic_activation));
  line("noise_dim", std::to_string(c.noise_dim));

  o += "\n[flow]\n";
  line("blocks", std::to_string(c.flow.blocks));
  line("hidden", join(c.flow.hidden));
  line("activation", nn::activation_name(c.flow.activation));
  line("scale_bound", format_exact(c.flow.scale_bound));

  o += "\n[optimizer]\n";
  optim(c.optimizer);
  o += "\n[critic_optimizer]\n";
  optim(c.critic_optimizer);

  o += "\n[adversarial]\n";
  line("surrogate", loss::surrogate_name(c.adversarial.surrogate));
  line("critic_steps", std::to_string(c.adversarial.critic_steps));
  line("clip", format_exact(c.adversarial.clip));

  o += "\n[recon]\n";
  recon(c.recon_for(Term::L_xh));
  for (Term t : kReconTerms) {
    o += fmt::format("\n[recon_{}]\n", term_name(t));
    recon(c.recon_for(t));
  }
  return o;
}

}  // namespace turbo::train
