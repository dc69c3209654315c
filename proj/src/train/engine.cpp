#include "turbo/train/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <sstream>

#include "turbo/loss/surrogates.hpp"
#include "turbo/util/format.hpp"
#include "turbo/util/rng.hpp"

namespace turbo::train {

namespace fs = std::filesystem;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLogvarBound = 10.0;

// Stream identifiers for Rng::derive.
enum Stream : std::uint64_t { kInitEnc = 1, kInitDec, kInitCriticZ, kInitCriticX, kInitFlow, kStepNoise = 100 };

bool any_active(const TermCoefficients& c, std::initializer_list<Term> terms) {
  for (Term t : terms)
    if (c.is_active(t)) return true;
  return false;
}

/// Lazily built forward graph of one step on one tape.
class Graph {
 public:
  /// With sample_latent = false the VAE head contributes its mean only.
  Graph(const RunState& s, Tape& tape, bool trainable, const Tensor& x, const Tensor& z, std::uint64_t noise_seed,
        bool sample_latent = true)
      : s_(s), rng_(noise_seed), sample_latent_(sample_latent) {
    x_ = tape.constant(x);
    z_ = tape.constant(z);
    if (s.needs.encoder) enc_ = nn::bind(tape, s.enc, trainable);
    if (s.needs.decoder) dec_ = nn::bind(tape, s.dec, trainable);
    if (s.needs.flow) flow_ = nn::bind(tape, s.flow, trainable);
    // Noise is drawn up front in a fixed order so it does not depend on
    // which outputs a caller requests.
    const std::size_t n = x.dim(0);
    if (s.vae_head()) eps_ = tape.constant(normal({n, s.cfg.data.dim_z}));
    if (s.cfg.noise_dim > 0) {
      noise_direct_ = tape.constant(normal({n, s.cfg.noise_dim}));
      noise_reverse_ = tape.constant(normal({z.dim(0), s.cfg.noise_dim}));
    }
  }

  Var x() const { return x_; }
  Var z() const { return z_; }
  const std::vector<Var>& flow_params() const { return flow_; }

  /// Bound parameters in the order encoder, decoder, flow.
  std::vector<Var> params() const {
    std::vector<Var> out = enc_;
    out.insert(out.end(), dec_.begin(), dec_.end());
    out.insert(out.end(), flow_.begin(), flow_.end());
    return out;
  }

  Var z_tilde() {
    if (s_.needs.flow) {
      if (!z_tilde_) z_tilde_ = nn::coupling_inverse(s_.flow_spec, flow_, x_).value;
      return *z_tilde_;
    }
    encode_x();
    if (!s_.vae_head()) return *enc_x_;
    if (!sample_latent_) return mean();
    if (!z_tilde_) z_tilde_ = mean() + ad::exp(0.5 * logvar()) * eps_;
    return *z_tilde_;
  }

  Var mean() {
    encode_x();
    const std::size_t dz = s_.cfg.data.dim_z;
    if (!mean_) mean_ = ad::slice(*enc_x_, 1, 0, dz);
    return *mean_;
  }

  Var logvar() {
    encode_x();
    const std::size_t dz = s_.cfg.data.dim_z;
    if (!logvar_) logvar_ = ad::clamp(ad::slice(*enc_x_, 1, dz, 2 * dz), -kLogvarBound, kLogvarBound);
    return *logvar_;
  }

  Var x_hat() {
    if (!x_hat_) {
      x_hat_ = s_.needs.flow ? nn::coupling_forward(s_.flow_spec, flow_, z_tilde()).value
                             : decode(z_tilde(), noise_direct_);
    }
    return *x_hat_;
  }

  Var x_tilde() {
    if (!x_tilde_) {
      x_tilde_ = s_.needs.flow ? nn::coupling_forward(s_.flow_spec, flow_, z_).value : decode(z_, noise_reverse_);
    }
    return *x_tilde_;
  }

  Var z_hat() {
    if (!z_hat_ && s_.needs.flow) z_hat_ = nn::coupling_inverse(s_.flow_spec, flow_, x_tilde()).value;
    if (!z_hat_) {
      Var e = nn::mlp_forward(s_.enc_spec, enc_, x_tilde());
      z_hat_ = s_.vae_head() ? ad::slice(e, 1, 0, s_.cfg.data.dim_z) : e;
    }
    return *z_hat_;
  }

 private:
  void encode_x() {
    if (!enc_x_) enc_x_ = nn::mlp_forward(s_.enc_spec, enc_, x_);
  }

  Tensor normal(ad::Shape shape) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng_.normal();
    return t;
  }

  Var decode(Var zin, Var noise) {
    if (s_.cfg.noise_dim > 0) zin = ad::concat({zin, noise}, 1);
    return nn::mlp_forward(s_.dec_spec, dec_, zin);
  }

  const RunState& s_;
  Rng rng_;
  bool sample_latent_;
  Var x_, z_, eps_, noise_direct_, noise_reverse_;
  std::vector<Var> enc_, dec_, flow_;
  std::optional<Var> enc_x_, z_tilde_, mean_, logvar_, x_hat_, x_tilde_, z_hat_;
};

std::uint64_t noise_seed(const RunState& s, std::uint64_t step) { return Rng::derive(s.cfg.seed, {kStepNoise, step}); }

double checked(const Var& v, const std::string& term, std::uint64_t step) {
  const double value = v.value().item();
  if (!std::isfinite(value)) throw NumericalAbort(term, step, fmt::format("value {}", value));
  return value;
}

template <typename F>
Var guarded(const std::string& term, std::uint64_t step, F f) {
  try {
    return f();
  } catch (const ad::DomainError& e) {
    throw NumericalAbort(term, step, e.what());
  }
}

struct CriticPair {
  Tensor real;
  Tensor fake;
};

double update_critic(const RunState& s, const nn::CriticSpec& spec, nn::ParamSet& params, ad::OptimizerState& opt,
                     const std::vector<CriticPair>& pairs, const std::string& name, std::uint64_t step) {
  double last = 0.0;
  for (std::size_t k = 0; k < s.cfg.adversarial.critic_steps; ++k) {
    Tape tape;
    const auto p = nn::bind(tape, params, true);
    Var total;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      Var l = guarded(name, step, [&] {
        return loss::adv_loss_critic(s.cfg.adversarial, spec, p, tape.constant(pairs[i].real),
                                     tape.constant(pairs[i].fake));
      });
      total = i == 0 ? l : total + l;
    }
    if (pairs.size() > 1) total = total * (1.0 / static_cast<double>(pairs.size()));
    last = checked(total, name, step);
    const auto grads = tape.backward(total);
    std::vector<Tensor> g;
    for (const Var& v : p) g.push_back(grads.at(v));
    ad::optimizer_step(params, g, opt, s.cfg.critic_optimizer);
    if (spec.mode == nn::CriticMode::Clipped) nn::clip_params(params, spec.clip);
  }
  return last;
}

void put_opt(ad::Checkpoint& ck, const std::string& name, const ad::OptimizerState& o) {
  ck.counters[name + ".t"] = o.t;
  ck.put_list(name + ".m", o.m);
  ck.put_list(name + ".v", o.v);
}

void get_opt(const ad::Checkpoint& ck, const std::string& name, ad::OptimizerState& o) {
  o.t = ck.counter(name + ".t");
  o.m = ck.get_list(name + ".m");
  o.v = ck.get_list(name + ".v");
}

void restore_list(const ad::Checkpoint& ck, const std::string& name, nn::ParamSet& params) {
  nn::ParamSet loaded = ck.get_list(name);
  if (loaded.size() != params.size()) {
    throw ad::CheckpointError(fmt::format("checkpoint: {} has {} tensors, expected {}", name, loaded.size(),
                                          params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (loaded[i].shape() != params[i].shape()) {
      throw ad::CheckpointError(fmt::format("checkpoint: {}.{} has shape {}, expected {}", name, i,
                                            ad::to_string(loaded[i].shape()), ad::to_string(params[i].shape())));
    }
  }
  params = std::move(loaded);
}

void check_batch(const RunState& s, const data::PairedBatch& batch) {
  if (batch.x.rank() != 2 || batch.x.dim(1) != s.cfg.data.dim_x || batch.z.rank() != 2 ||
      batch.z.dim(1) != s.cfg.data.dim_z || batch.x.dim(0) != batch.z.dim(0)) {
    throw ad::ShapeError("batch does not match the configured dimensions");
  }
}

std::string fmt_value(double v) { return std::isnan(v) ? "nan" : format_exact(v); }

}  // namespace

NumericalAbort::NumericalAbort(std::string term, std::uint64_t step, const std::string& detail)
    : std::runtime_error(fmt::format("numerical abort at step {} in term {}: {}", step, term, detail)),
      term_(std::move(term)),
      step_(step) {}

NetworkNeeds required_networks(const RunConfig& cfg) {
  const auto& c = cfg.coefficients;
  NetworkNeeds n;
  if (cfg.preset == Preset::FLOW) {
    n.flow = true;
    return n;
  }
  using T = Term;
  n.encoder = any_active(c, {T::L_zt, T::D_zt, T::L_xh, T::D_xh, T::L_zh, T::D_zh}) || c.alae_active ||
              c.vae_prior_active;
  n.decoder = any_active(c, {T::L_xh, T::D_xh, T::L_xt, T::D_xt, T::L_zh, T::D_zh}) || c.alae_active;
  n.critic_z = any_active(c, {T::D_zt, T::D_zh}) || c.alae_active;
  n.critic_x = any_active(c, {T::D_xh, T::D_xt});
  return n;
}

RunState build_run(const RunConfig& cfg) {
  validate(cfg);
  RunState s;
  s.cfg = cfg;
  s.cfg.data.validate();
  s.needs = required_networks(cfg);
  const std::size_t dx = cfg.data.dim_x, dz = cfg.data.dim_z;
  const auto mode = cfg.adversarial.surrogate == loss::AdvSurrogate::Wasserstein ? nn::CriticMode::Clipped
                                                                                 : nn::CriticMode::Logistic;
  if (s.needs.encoder) {
    s.enc_spec = nn::make_mlp(dx, cfg.hidden, s.vae_head() ? 2 * dz : dz, cfg.activation);
    s.enc = nn::init_params(s.enc_spec, Rng::derive(cfg.seed, {kInitEnc}));
  }
  if (s.needs.decoder) {
    s.dec_spec = nn::make_mlp(dz + cfg.noise_dim, cfg.hidden, dx, cfg.activation);
    s.dec = nn::init_params(s.dec_spec, Rng::derive(cfg.seed, {kInitDec}));
  }
  if (s.needs.critic_z) {
    s.critic_z_spec = {nn::make_mlp(dz, cfg.critic_hidden, 1, cfg.critic_activation), mode, cfg.adversarial.clip};
    s.critic_z = nn::init_params(s.critic_z_spec.net, Rng::derive(cfg.seed, {kInitCriticZ}));
    if (mode == nn::CriticMode::Clipped) nn::clip_params(s.critic_z, cfg.adversarial.clip);
  }
  if (s.needs.critic_x) {
    s.critic_x_spec = {nn::make_mlp(dx, cfg.critic_hidden, 1, cfg.critic_activation), mode, cfg.adversarial.clip};
    s.critic_x = nn::init_params(s.critic_x_spec.net, Rng::derive(cfg.seed, {kInitCriticX}));
    if (mode == nn::CriticMode::Clipped) nn::clip_params(s.critic_x, cfg.adversarial.clip);
  }
  if (s.needs.flow) {
    s.flow_spec = cfg.flow;
    s.flow_spec.dim = dx;
    s.flow = nn::init_flow_params(s.flow_spec, Rng::derive(cfg.seed, {kInitFlow}));
  }
  return s;
}

data::PairedBatch training_batch(const RunConfig& cfg, std::uint64_t step) {
  return data::sample(cfg.data, cfg.batch_size, Rng::derive(cfg.data_seed, {step}));
}

GeneratorObjective generator_objective(const RunState& s, const data::PairedBatch& batch, std::uint64_t step) {
  check_batch(s, batch);
  const auto& c = s.cfg.coefficients;
  const std::uint64_t nseed = noise_seed(s, step);
  StepRecord rec;
  rec.step = step;
  rec.terms.fill(kNaN);
  rec.vae_prior = kNaN;
  rec.alae = kNaN;
  rec.critic_z = kNaN;
  rec.critic_x = kNaN;
  Tape tape;
  Graph g(s, tape, true, batch.x, batch.z, nseed);
  const auto cz = s.needs.critic_z ? nn::bind(tape, s.critic_z, false) : std::vector<Var>{};
  const auto cx = s.needs.critic_x ? nn::bind(tape, s.critic_x, false) : std::vector<Var>{};
  const auto& adv = s.cfg.adversarial;

  Var total;
  bool have_total = false;
  auto add = [&](double weight, Var term) {
    Var w = weight * term;
    total = have_total ? total + w : w;
    have_total = true;
  };

  for (Term t : kAllTerms) {
    if (!c.is_active(t)) continue;
    const std::string name(term_name(t));
    Var v = guarded(name, step, [&]() -> Var {
      const auto& rc = s.cfg.recon_for(t);
      switch (t) {
        case Term::L_zt: return loss::recon_loss(rc, g.z(), g.z_tilde());
        case Term::D_zt: return loss::adv_loss_generator(adv, s.critic_z_spec, cz, g.z_tilde());
        case Term::L_xh: return loss::recon_loss(rc, g.x(), g.x_hat());
        case Term::D_xh: return loss::adv_loss_generator(adv, s.critic_x_spec, cx, g.x_hat());
        case Term::L_xt: return loss::recon_loss(rc, g.x(), g.x_tilde());
        case Term::D_xt:
          if (s.needs.flow) return loss::flow_nll(s.flow_spec, g.flow_params(), g.x());
          return loss::adv_loss_generator(adv, s.critic_x_spec, cx, g.x_tilde());
        case Term::L_zh: return loss::recon_loss(rc, g.z(), g.z_hat());
        case Term::D_zh: return loss::adv_loss_generator(adv, s.critic_z_spec, cz, g.z_hat());
      }
      throw std::logic_error("unreachable");
    });
    const double value = checked(v, name, step);
    rec.terms[static_cast<int>(t)] = value;
    (is_direct(t) ? rec.direct : rec.reverse) += c[t] * value;
    add(c[t], v);
  }
  if (c.vae_prior_active) {
    Var v = guarded("vae_prior", step, [&] { return loss::gaussian_kl_standard(g.mean(), g.logvar()); });
    rec.vae_prior = checked(v, "vae_prior", step);
    rec.direct += c.vae_prior * rec.vae_prior;
    add(c.vae_prior, v);
  }
  if (c.alae_active) {
    Var v = guarded("alae", step, [&] { return loss::adv_loss_generator(adv, s.critic_z_spec, cz, g.z_hat()); });
    rec.alae = checked(v, "alae", step);
    rec.reverse += c.alae * rec.alae;
    add(c.alae, v);
  }
  rec.total = rec.direct + rec.reverse;
  if (!std::isfinite(rec.total)) throw NumericalAbort("total", step, fmt::format("value {}", rec.total));

  const auto grads = tape.backward(total);
  GeneratorObjective out;
  out.record = rec;
  for (const Var& v : g.params()) out.grads.push_back(grads.at(v));
  return out;
}

StepRecord train_step(RunState& s, const data::PairedBatch& batch) {
  const auto& c = s.cfg.coefficients;
  const std::uint64_t step = s.step + 1;
  check_batch(s, batch);
  const std::uint64_t nseed = noise_seed(s, step);
  double critic_z = kNaN, critic_x = kNaN;

  // Critic phase.
  if (s.needs.critic_z || s.needs.critic_x) {
    Tape tape;
    Graph g(s, tape, false, batch.x, batch.z, nseed);
    std::vector<CriticPair> pz, px;
    try {
      if (c.is_active(Term::D_zt)) pz.push_back({batch.z, g.z_tilde().value()});
      if (c.is_active(Term::D_zh)) pz.push_back({batch.z, g.z_hat().value()});
      if (c.alae_active) pz.push_back({g.z_tilde().value(), g.z_hat().value()});
      if (c.is_active(Term::D_xh)) px.push_back({batch.x, g.x_hat().value()});
      if (c.is_active(Term::D_xt) && !s.needs.flow) px.push_back({batch.x, g.x_tilde().value()});
    } catch (const ad::DomainError& e) {
      throw NumericalAbort("generator forward", step, e.what());
    }
    if (!pz.empty())
      critic_z = update_critic(s, s.critic_z_spec, s.critic_z, s.critic_z_opt, pz, "critic_z", step);
    if (!px.empty())
      critic_x = update_critic(s, s.critic_x_spec, s.critic_x, s.critic_x_opt, px, "critic_x", step);
  }

  GeneratorObjective obj = generator_objective(s, batch, step);
  obj.record.critic_z = critic_z;
  obj.record.critic_x = critic_x;
  for (const Tensor& gr : obj.grads)
    if (!ad::all_finite(gr)) throw NumericalAbort("gradient", step, "non-finite generator gradient");
  std::vector<Tensor> params;
  std::vector<nn::ParamSet*> owners;
  if (s.needs.encoder) owners.push_back(&s.enc);
  if (s.needs.decoder) owners.push_back(&s.dec);
  if (s.needs.flow) owners.push_back(&s.flow);
  for (auto* o : owners)
    for (auto& t : *o) params.push_back(std::move(t));
  ad::optimizer_step(params, obj.grads, s.gen_opt, s.cfg.optimizer);
  std::size_t k = 0;
  for (auto* o : owners)
    for (auto& t : *o) t = std::move(params[k++]);

  s.step = step;
  return obj.record;
}

Outputs forward_all(const RunState& s, const Tensor& x, const Tensor& z, std::uint64_t nseed) {
  Tape tape;
  Graph g(s, tape, false, x, z, nseed, false);
  Outputs o;
  const bool enc = s.needs.encoder || s.needs.flow;
  const bool dec = s.needs.decoder || s.needs.flow;
  if (enc) o.z_tilde = g.z_tilde().value();
  if (dec) o.x_tilde = g.x_tilde().value();
  if (enc && dec) {
    o.x_hat = g.x_hat().value();
    o.z_hat = g.z_hat().value();
  }
  return o;
}

double flow_nll_value(const RunState& s, const Tensor& x) {
  if (!s.needs.flow) throw std::logic_error("flow_nll_value: run has no flow");
  Tape tape;
  const auto p = nn::bind(tape, s.flow, false);
  return loss::flow_nll(s.flow_spec, p, tape.constant(x)).value().item();
}

ad::Checkpoint to_checkpoint(const RunState& s) {
  ad::Checkpoint ck;
  ck.counters["step"] = s.step;
  ck.put_list("enc", s.enc);
  ck.put_list("dec", s.dec);
  ck.put_list("critic_z", s.critic_z);
  ck.put_list("critic_x", s.critic_x);
  ck.put_list("flow", s.flow);
  put_opt(ck, "opt.gen", s.gen_opt);
  put_opt(ck, "opt.critic_z", s.critic_z_opt);
  put_opt(ck, "opt.critic_x", s.critic_x_opt);
  return ck;
}

void restore_checkpoint(RunState& s, const ad::Checkpoint& ck) {
  s.step = ck.counter("step");
  restore_list(ck, "enc", s.enc);
  restore_list(ck, "dec", s.dec);
  restore_list(ck, "critic_z", s.critic_z);
  restore_list(ck, "critic_x", s.critic_x);
  restore_list(ck, "flow", s.flow);
  get_opt(ck, "opt.gen", s.gen_opt);
  get_opt(ck, "opt.critic_z", s.critic_z_opt);
  get_opt(ck, "opt.critic_x", s.critic_x_opt);
}

std::string metrics_header() {
  std::string h = "step";
  for (Term t : kAllTerms) h += fmt::format("\t{}", term_name(t));
  h += "\tvae_prior\talae\tdirect\treverse\ttotal\tcritic_z\tcritic_x";
  return h;
}

std::string metrics_row(const StepRecord& r) {
  std::string row = std::to_string(r.step);
  for (double v : r.terms) row += "\t" + fmt_value(v);
  for (double v : {r.vae_prior, r.alae, r.direct, r.reverse, r.total, r.critic_z, r.critic_x})
    row += "\t" + fmt_value(v);
  return row;
}

void init_run_dir(const fs::path& dir, const RunConfig& cfg, bool overwrite) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!overwrite) throw std::runtime_error(dir.string() + " is not empty (pass --overwrite to replace it)");
      for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
    }
  }
  fs::create_directories(dir / "checkpoints");
  std::ofstream(dir / "config.resolved.ini") << resolved_ini(cfg);
  std::ofstream(dir / "metrics.tsv") << metrics_header() << '\n';
}

fs::path checkpoint_path(const fs::path& dir, std::uint64_t step) {
  return dir / "checkpoints" / fmt::format("step-{:08d}.ckpt", step);
}

std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
  std::optional<fs::path> best;
  std::uint64_t best_step = 0;
  if (!fs::is_directory(dir / "checkpoints")) return best;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) {
    const std::string name = e.path().filename().string();
    if (name.rfind("step-", 0) != 0 || e.path().extension() != ".ckpt") continue;
    try {
      const auto step = static_cast<std::uint64_t>(parse_int(name.substr(5, name.size() - 10)));
      if (!best || step > best_step) {
        best = e.path();
        best_step = step;
      }
    } catch (const std::invalid_argument&) {
    }
  }
  return best;
}

void train(RunState& s, std::uint64_t until, const std::optional<fs::path>& run_dir) {
  if (until <= s.step) throw std::invalid_argument(fmt::format("train: already at step {} (target {})", s.step, until));
  std::ofstream metrics;
  if (run_dir) {
    metrics.open(*run_dir / "metrics.tsv", std::ios::app);
    if (!metrics) throw std::runtime_error("cannot append to " + (*run_dir / "metrics.tsv").string());
  }
  while (s.step < until) {
    const std::uint64_t step = s.step + 1;
    StepRecord rec;
    try {
      rec = train_step(s, training_batch(s.cfg, step));
    } catch (const NumericalAbort& e) {
      if (run_dir) {
        std::ofstream dump(*run_dir / "nan_dump.txt");
        dump << e.what() << "\nterm\t" << e.term() << "\nstep\t" << e.step() << '\n';
        dump << "# parameters at the start of the failing step\n" << ad::serialize_checkpoint(to_checkpoint(s));
      }
      throw;
    }
    if (!run_dir) continue;
    if (step == 1 || step % s.cfg.log_interval == 0 || step == until) metrics << metrics_row(rec) << '\n' << std::flush;
    if (step % s.cfg.checkpoint_interval == 0 || step == until)
      ad::save_checkpoint(checkpoint_path(*run_dir, step), to_checkpoint(s));
  }
}

RunState resume_run(const fs::path& dir) {
  RunState s = build_run(load_config(dir / "config.resolved.ini"));
  const auto ck = latest_checkpoint(dir);
  if (!ck) throw std::runtime_error("no checkpoint in " + dir.string());
  restore_checkpoint(s, ad::load_checkpoint(*ck));

  std::ifstream in(dir / "metrics.tsv");
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept += line + '\n';
      header = false;
      continue;
    }
    const auto tab = line.find('\t');
    if (static_cast<std::uint64_t>(parse_int(line.substr(0, tab))) <= s.step) kept += line + '\n';
  }
  in.close();
  std::ofstream(dir / "metrics.tsv", std::ios::trunc) << kept;
  return s;
}

}  // namespace turbo::train
