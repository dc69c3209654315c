#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradcheck.hpp"
#include "turbo/loss/surrogates.hpp"
#include "turbo/train/engine.hpp"

using namespace turbo;
using namespace turbo::train;
namespace fs = std::filesystem;
using ad::Tensor;
using ad::Var;

namespace {

/// `data` lines go into [data]; `extra` appends further sections.
std::string small_ini(const std::string& preset, const std::string& extra = "", const std::string& data = "") {
  std::string family = "linear-gaussian";
  if (preset == "GAN" || preset == "WGAN") family = "gaussian-ring";
  return "[run]\npreset = " + preset +
         "\nsteps = 20\nbatch_size = 32\nlog_interval = 5\ncheckpoint_interval = 10\neval_samples = 500\n"
         "[data]\nfamily = " + family + "\n" + data +
         "[network]\nhidden = 8\ncritic_hidden = 8\n[flow]\nhidden = 8\nblocks = 2\n" + extra;
}

RunConfig small(const std::string& preset, const std::string& extra = "", const std::string& data = "") {
  return parse_config(small_ini(preset, extra, data));
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("turbo_test_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<nn::ParamSet*> generator_sets(RunState& s) {
  std::vector<nn::ParamSet*> out;
  if (s.needs.encoder) out.push_back(&s.enc);
  if (s.needs.decoder) out.push_back(&s.dec);
  if (s.needs.flow) out.push_back(&s.flow);
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("networks are instantiated only when an active term reads them") {
  struct Row {
    const char* preset;
    bool enc, dec, cz, cx, flow;
  };
  const Row rows[] = {
      {"AAE", true, true, true, false, false},        {"GAN", false, true, false, true, false},
      {"WGAN", false, true, false, true, false},       {"PIX2PIX", false, true, false, true, false},
      {"CYCLEGAN", true, true, true, true, false},     {"FLOW", false, false, false, false, true},
      {"ALAE", true, true, true, false, false},        {"TURBO_FULL", true, true, true, true, false},
      {"VAE_LIKE", true, true, false, false, false},
  };
  for (const Row& r : rows) {
    CAPTURE(r.preset);
    const RunState s = build_run(small(r.preset));
    CHECK(s.needs.encoder == r.enc);
    CHECK(s.needs.decoder == r.dec);
    CHECK(s.needs.critic_z == r.cz);
    CHECK(s.needs.critic_x == r.cx);
    CHECK(s.needs.flow == r.flow);
    CHECK(s.enc.empty() != r.enc);
    CHECK(s.critic_x.empty() != r.cx);
  }
  const RunState vae = build_run(small("VAE_LIKE"));
  CHECK(vae.enc_spec.output_width() == 2 * vae.cfg.data.dim_z);
  const RunState wgan = build_run(small("WGAN"));
  CHECK(wgan.critic_x_spec.mode == nn::CriticMode::Clipped);
  CHECK(wgan.cfg.adversarial.critic_steps == 5);
  for (const auto& t : wgan.critic_x)
    for (double v : t.data()) CHECK(std::abs(v) <= wgan.cfg.adversarial.clip);
}

TEST_CASE("custom term masks") {
  const RunConfig c = small("CUSTOM", "[terms]\nL_xh = 1.0\nD_xt = 0.5\n");
  CHECK(c.coefficients.is_active(Term::L_xh));
  CHECK_FALSE(c.coefficients.is_active(Term::L_zt));
  const RunState s = build_run(c);
  CHECK(s.needs.encoder);
  CHECK(s.needs.critic_x);
  CHECK_FALSE(s.needs.critic_z);
  CHECK_THROWS_AS(small("CUSTOM", "[terms]\nalae = 1\nD_zt = 1\n"), ConfigError);
  CHECK_THROWS_AS(small("CUSTOM"), ConfigError);
  CHECK_THROWS_AS(small("GAN", "[terms]\nL_zt = 1\n"), ConfigError);
}

TEST_CASE("zero coefficients leave the parameters unchanged") {
  RunState s = build_run(small("CUSTOM", "[terms]\nL_zt = 0\nL_xh = 0\nL_zh = 0\n"));
  const auto enc = s.enc, dec = s.dec;
  const auto rec = train_step(s, training_batch(s.cfg, 1));
  CHECK(std::isfinite(rec.terms[static_cast<int>(Term::L_xh)]));
  CHECK(rec.total == 0.0);
  for (std::size_t i = 0; i < enc.size(); ++i) CHECK(s.enc[i] == enc[i]);
  for (std::size_t i = 0; i < dec.size(); ++i) CHECK(s.dec[i] == dec[i]);
}

TEST_CASE("the full objective logs all eight terms") {
  RunState s = build_run(small("TURBO_FULL"));
  const auto rec = train_step(s, training_batch(s.cfg, 1));
  for (Term t : kAllTerms) CHECK(std::isfinite(rec.terms[static_cast<int>(t)]));
  CHECK(std::isfinite(rec.critic_z));
  CHECK(std::isfinite(rec.critic_x));
  CHECK(rec.total == doctest::Approx(rec.direct + rec.reverse));
  CHECK(s.step == 1);
  CHECK(std::isnan(build_run(small("GAN")).cfg.coefficients[Term::L_zt]) == false);
  RunState g = build_run(small("GAN"));
  const auto gr = train_step(g, training_batch(g.cfg, 1));
  CHECK(std::isnan(gr.terms[static_cast<int>(Term::L_zt)]));
  CHECK(std::isnan(gr.critic_z));
}

TEST_CASE("pairing and range validation") {
  try {
    small("PIX2PIX", "", "paired = false\n");
    FAIL("expected a pairing error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("terms.L_xt") != std::string::npos);
  }
  try {
    small("TURBO_FULL", "", "paired = false\n");
    FAIL("expected a pairing error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("terms.L_zt") != std::string::npos);
  }
  CHECK_NOTHROW(small("CYCLEGAN", "", "paired = false\n"));
  CHECK_THROWS_AS(parse_config("[run]\npreset = GAN\nsteps = 0\n[data]\nfamily = gaussian-ring\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\npreset = GAN\nbatch_size = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\npreset = NOPE\n"), ConfigError);
  CHECK_THROWS_AS(small("FLOW", "", "dim_z = 3\n"), ConfigError);
  RunConfig noisy = small("FLOW");
  noisy.noise_dim = 2;
  CHECK_THROWS_AS(validate(noisy), ConfigError);
}

TEST_CASE("config parsing errors name the field") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("[run]\npreset = GAN\nstepz = 3\n") == "run.stepz: unknown key");
  CHECK(message("[runn]\npreset = GAN\n") == "runn: unknown section");
  CHECK(message("[data]\nfamily = gaussian-ring\n") == "run.preset: required");
  CHECK(message("[run]\npreset = AAE\n[weights]\nlambda_d = -1\n").starts_with("weights.lambda_d"));
}

TEST_CASE("the resolved echo parses back to the same configuration") {
  for (const char* p : {"AAE", "GAN", "WGAN", "PIX2PIX", "CYCLEGAN", "FLOW", "ALAE", "TURBO_FULL", "VAE_LIKE"}) {
    CAPTURE(p);
    const RunConfig c = small(p, "[recon_L_xh]\nnorm = l1\nalpha = 2.5\n");
    const std::string once = resolved_ini(c);
    CHECK(resolved_ini(parse_config(once)) == once);
  }
  const RunConfig custom = small("CUSTOM", "[terms]\nL_xh = 0.25\nalae = 1\n");
  CHECK(resolved_ini(parse_config(resolved_ini(custom))) == resolved_ini(custom));
  CHECK(parse_config(resolved_ini(custom)).coefficients[Term::L_xh] == 0.25);
}

TEST_CASE("resume reproduces an uninterrupted run bitwise") {
  for (const char* p : {"TURBO_FULL", "WGAN", "VAE_LIKE"}) {
    CAPTURE(p);
    const RunConfig c = small(p);
    const fs::path a = fresh_dir(std::string("resume_a_") + p), b = fresh_dir(std::string("resume_b_") + p);
    init_run_dir(a, c, false);
    RunState sa = build_run(c);
    train::train(sa, 20, a);
    init_run_dir(b, c, false);
    RunState sb = build_run(c);
    train::train(sb, 10, b);
    RunState rb = resume_run(b);
    CHECK(rb.step == 10);
    train::train(rb, 20, b);
    CHECK(ad::serialize_checkpoint(to_checkpoint(rb)) == ad::serialize_checkpoint(to_checkpoint(sa)));
    CHECK(read_file(a / "metrics.tsv") == read_file(b / "metrics.tsv"));
    CHECK_THROWS(init_run_dir(a, c, false));
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("flow likelihood decreases over the first hundred steps") {
  // Default network, batch and learning rate on raw linear-gaussian data far
  // from the identity map, evaluated on a fixed held-out sample.
  const RunConfig c = parse_config(
      "[run]\npreset = FLOW\nsteps = 100\n[data]\nfamily = linear-gaussian\nnormalize = false\n"
      "mixing = 1.0 0.5 -0.3 0.8\noffset = 2.0 -3.0\nlatent_scale = 2.0 1.5\n");
  RunState s = build_run(c);
  const Tensor held = data::sample(c.data, 10000, 999).x;
  double prev = flow_nll_value(s, held);
  const double first = prev;
  int increases = 0;
  for (std::uint64_t k = 1; k <= 100; ++k) {
    train_step(s, training_batch(s.cfg, k));
    const double now = flow_nll_value(s, held);
    if (!(now < prev)) ++increases;
    prev = now;
  }
  CHECK(increases == 0);
  CHECK(prev < first);
}

TEST_CASE("critic and generator updates are isolated") {
  // One GAN step, replayed by hand: the critic sees detached fakes from the
  // pre-step decoder; the decoder then descends against the updated, frozen
  // critic.
  RunState s = build_run(small("GAN"));
  const RunState before = s;
  const auto batch = training_batch(s.cfg, 1);
  train_step(s, batch);

  const Tensor fake = *forward_all(before, batch.x, batch.z, 0).x_tilde;
  nn::ParamSet critic = before.critic_x;
  ad::OptimizerState copt;
  {
    ad::Tape t;
    const auto p = nn::bind(t, critic, true);
    const Var l = loss::adv_loss_critic(s.cfg.adversarial, s.critic_x_spec, p, t.constant(batch.x), t.constant(fake));
    const auto g = t.backward(l);
    std::vector<Tensor> grads;
    for (const auto& v : p) grads.push_back(g.at(v));
    ad::optimizer_step(critic, grads, copt, s.cfg.critic_optimizer);
  }
  for (std::size_t i = 0; i < critic.size(); ++i) CHECK(critic[i] == s.critic_x[i]);

  nn::ParamSet dec = before.dec;
  ad::OptimizerState gopt;
  {
    ad::Tape t;
    const auto d = nn::bind(t, dec, true);
    const auto p = nn::bind(t, critic, false);
    const Var x = nn::mlp_forward(s.dec_spec, d, t.constant(batch.z));
    const Var l = loss::adv_loss_generator(s.cfg.adversarial, s.critic_x_spec, p, x);
    const auto g = t.backward(l);
    std::vector<Tensor> grads;
    for (const auto& v : d) grads.push_back(g.at(v));
    ad::optimizer_step(dec, grads, gopt, s.cfg.optimizer);
  }
  for (std::size_t i = 0; i < dec.size(); ++i) CHECK(dec[i] == s.dec[i]);

  RunState w = build_run(small("WGAN"));
  train_step(w, training_batch(w.cfg, 1));
  CHECK(w.gen_opt.t == 1);
  CHECK(w.critic_x_opt.t == 5);
}

TEST_CASE("inactive inputs do not reach the generator loss") {
  // GAN reads only z; AAE reads only x; CycleGAN terms never pair rows.
  RunState gan = build_run(small("GAN"));
  auto batch = training_batch(gan.cfg, 1);
  const double g0 = generator_objective(gan, batch, 1).record.total;
  for (double& v : batch.x.data()) v += 3.0;
  CHECK(generator_objective(gan, batch, 1).record.total == g0);

  RunState aae = build_run(small("AAE"));
  batch = training_batch(aae.cfg, 1);
  const auto a0 = generator_objective(aae, batch, 1);
  for (double& v : batch.z.data()) v = -v;
  const auto a1 = generator_objective(aae, batch, 1);
  CHECK(a1.record.total == a0.record.total);
  for (std::size_t i = 0; i < a0.grads.size(); ++i) CHECK(a1.grads[i] == a0.grads[i]);

  RunState cyc = build_run(small("CYCLEGAN", "", "paired = false\n"));
  batch = training_batch(cyc.cfg, 1);
  const double c0 = generator_objective(cyc, batch, 1).record.total;
  const std::size_t n = batch.z.dim(0), dz = batch.z.dim(1);
  Tensor rolled = batch.z;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dz; ++j) rolled.at(r, j) = batch.z.at((r + 1) % n, j);
  batch.z = rolled;
  CHECK(generator_objective(cyc, batch, 1).record.total == doctest::Approx(c0).epsilon(1e-12));
}

TEST_CASE("numerical aborts name the failing term") {
  RunConfig c = small("VAE_LIKE");
  RunState s = build_run(c);
  for (auto& t : s.dec)
    for (double& v : t.data()) v = std::numeric_limits<double>::quiet_NaN();
  const fs::path dir = fresh_dir("nan");
  init_run_dir(dir, c, false);
  try {
    train::train(s, 5, dir);
    FAIL("expected an abort");
  } catch (const NumericalAbort& e) {
    CHECK(e.term() == "L_xh");
    CHECK(e.step() == 1);
  }
  CHECK(read_file(dir / "nan_dump.txt").find("term\tL_xh") != std::string::npos);
  fs::remove_all(dir);

  // An overflowing latent mean leaves the reconstruction finite (the decoder
  // saturates) but not the prior divergence.
  RunState big = build_run(c);
  big.enc.back()[0] = 1e200;
  try {
    train_step(big, training_batch(c, 1));
    FAIL("expected an abort");
  } catch (const NumericalAbort& e) {
    CHECK(e.term() == "vae_prior");
  }
}

TEST_CASE("preset losses match finite differences end to end") {
  for (const char* p : {"AAE", "GAN", "WGAN", "PIX2PIX", "CYCLEGAN", "FLOW", "ALAE", "TURBO_FULL", "VAE_LIKE"}) {
    CAPTURE(p);
    RunConfig c = small(p);
    c.batch_size = 12;
    RunState s = build_run(c);
    // A few steps move the critics and flow away from their initial values.
    for (std::uint64_t k = 1; k <= 3; ++k) train_step(s, training_batch(c, k));
    const auto batch = training_batch(c, 4);
    const auto obj = generator_objective(s, batch, 4);
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t gi = 0;
    for (nn::ParamSet* set : generator_sets(s)) {
      for (auto& t : *set) {
        const Tensor& grad = obj.grads.at(gi++);
        for (std::size_t k = 0; k < t.numel(); ++k) {
          const double x0 = t[k];
          t[k] = x0 + h;
          const double up = generator_objective(s, batch, 4).record.total;
          t[k] = x0 - h;
          const double down = generator_objective(s, batch, 4).record.total;
          t[k] = x0;
          worst = std::max(worst, turbo::testing::rel_error(grad[k], (up - down) / (2 * h)));
        }
      }
    }
    CHECK(gi == obj.grads.size());
    CHECK(worst < 1e-4);
  }
}
