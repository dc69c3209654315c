#include "turbo/oracle/verify.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "turbo/oracle/objectives.hpp"
#include "turbo/oracle/random_system.hpp"
#include "turbo/oracle/saturation.hpp"

namespace turbo::oracle {

void VerifyOptions::validate() const {
  if (trials < 1) throw std::invalid_argument("verify: trials must be >= 1");
  if (min_size < 1 || max_size < min_size) throw std::invalid_argument("verify: need 1 <= min_size <= max_size");
  if (threads < 1) throw std::invalid_argument("verify: threads must be >= 1");
}

bool VerifyReport::all_passed() const {
  for (const auto& p : properties)
    if (!p.passed) return false;
  return true;
}

const PropertyResult& VerifyReport::property(const std::string& name) const {
  for (const auto& p : properties)
    if (p.name == name) return p;
  throw std::out_of_range("no property named " + name);
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json j;
  j["trials"] = options.trials;
  j["seed"] = options.seed;
  j["min_size"] = options.min_size;
  j["max_size"] = options.max_size;
  j["saturation_systems"] = options.saturation_systems;
  j["perturbations"] = options.perturbations;
  j["bibae_systems"] = options.bibae_systems;
  j["fault"] = options.fault == Fault::None ? "none" : "corrupt-optimum";
  j["seconds"] = seconds;
  j["passed"] = all_passed();
  for (const auto& p : properties) {
    nlohmann::json e;
    e["name"] = p.name;
    e["passed"] = p.passed;
    e["max_violation"] = p.max_violation;
    e["tolerance"] = p.tolerance;
    e["checks"] = p.checks;
    if (!p.detail.empty()) e["detail"] = p.detail;
    j["properties"].push_back(std::move(e));
  }
  return j;
}

namespace {

// Per-case outcome; merged in case order so the report does not depend on
// how cases were spread over threads.
struct CaseResult {
  double violation = -std::numeric_limits<double>::infinity();
  std::size_t checks = 0;
  std::string failure;
};

template <typename F>
std::vector<CaseResult> run_cases(std::size_t n, unsigned threads, F&& fn) {
  std::vector<CaseResult> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        out[i] = fn(i);
      } catch (const std::exception& e) {
        out[i].violation = std::numeric_limits<double>::infinity();
        out[i].failure = fmt::format("case {} threw: {}", i, e.what());
      }
    }
  };
  if (threads <= 1 || n < 2) {
    work(0, n);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t begin = 0; begin < n; begin += chunk) pool.emplace_back(work, begin, std::min(n, begin + chunk));
  pool.clear();
  return out;
}

PropertyResult merge(std::string name, double tolerance, const std::vector<CaseResult>& cases) {
  PropertyResult r;
  r.name = std::move(name);
  r.tolerance = tolerance;
  for (const auto& c : cases) {
    r.max_violation = std::max(r.max_violation, c.violation);
    r.checks += c.checks;
    const bool failed = !c.failure.empty() || c.violation > tolerance;
    if (failed && r.passed) {
      r.passed = false;
      r.detail = c.failure.empty() ? fmt::format("violation {:.3e} > {:.1e}", c.violation, tolerance) : c.failure;
    }
  }
  return r;
}

enum Stream : std::uint64_t { kBoundChain = 1, kBibae, kSaturation, kPresets, kPaths, kIdentities };

CaseResult bound_chain_case(const VerifyOptions& o, std::size_t i) {
  Rng rng(Rng::derive(o.seed, {kBoundChain, i}));
  const TurboSystem sys = random_system_sized(o.min_size, o.max_size, rng);
  const TermBreakdown t = eight_terms(sys);
  const std::array<std::pair<double, double>, 4> pairs = {{{t.b_direct_enc, t.i_true},
                                                          {t.b_reverse_dec, t.i_true},
                                                          {t.b_direct_dec, t.i_enc},
                                                          {t.b_reverse_enc, t.i_dec}}};
  CaseResult c;
  for (const auto& [bound, mi] : pairs) c.violation = std::max(c.violation, bound - mi);
  c.checks = 4;
  return c;
}

CaseResult bibae_case(const VerifyOptions& o, std::size_t i) {
  Rng rng(Rng::derive(o.seed, {kBibae, i}));
  const TurboSystem sys = random_system_sized(o.min_size, o.max_size, rng);
  IbnWeights w;
  w.lambda_b = rng.uniform(0.0, 3.0);
  CaseResult c;
  c.violation = std::abs(bibae_loss(sys, w) - bibae_loss_mi_form(sys, w));
  c.checks = 1;
  return c;
}

CaseResult saturation_case(const VerifyOptions& o, std::size_t i) {
  Rng rng(Rng::derive(o.seed, {kSaturation, i}));
  const std::size_t span = o.max_size - o.min_size + 1;
  const auto joint = random_joint(o.min_size + rng.below(span), o.min_size + rng.below(span), rng);
  SaturationOptions so;
  so.corrupt_optimum = o.fault == Fault::CorruptOptimum;
  CaseResult c;
  for (BoundKind b : kAllBounds) {
    const auto rep = saturation_check(joint, b, o.perturbations, rng.next_u64(), so);
    c.violation = std::max({c.violation, rep.identity_residual, rep.max_excess});
    c.checks += 1 + rep.trials;
    if (!rep.passed() && c.failure.empty()) {
      c.failure = fmt::format("system {} bound {}: identity residual {:.3e}, {} perturbation(s) above optimum", i,
                              bound_name(b), rep.identity_residual, rep.violations.size());
    }
  }
  return c;
}

// Each preset value against the signed sum written out from the breakdown.
CaseResult preset_case(const VerifyOptions& o, std::size_t i) {
  Rng rng(Rng::derive(o.seed, {kPresets, i}));
  const TurboSystem sys = random_system_sized(o.min_size, o.max_size, rng);
  TurboWeights w{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
  const TermBreakdown t = eight_terms(sys);
  using T = Term;
  const std::array<std::pair<Preset, double>, 6> expected = {{
      {Preset::AAE, t[T::D_zt] + w.lambda_d * t[T::L_xh]},
      {Preset::GAN, t[T::D_xt]},
      {Preset::PIX2PIX, t[T::L_xt] + t[T::D_xt]},
      {Preset::CYCLEGAN,
       t[T::D_zt] + w.lambda_d * t[T::L_xh] + w.lambda_t * t[T::D_xt] + w.lambda_t * w.lambda_r * t[T::L_zh]},
      {Preset::ALAE, t[T::L_zh] + alae_term(sys)},
      {Preset::TURBO_FULL, t[T::L_zt] + t[T::D_zt] + w.lambda_d * (t[T::L_xh] + t[T::D_xh]) +
                               w.lambda_t * (t[T::L_xt] + t[T::D_xt] + w.lambda_r * (t[T::L_zh] + t[T::D_zh]))},
  }};
  CaseResult c;
  for (const auto& [preset, value] : expected) {
    c.violation = std::max(c.violation, std::abs(preset_loss(sys, preset, w) - value));
    ++c.checks;
  }
  // CycleGAN in its original weighting: lambda_T = 1, lambda_D = lambda_R.
  const double lam = rng.uniform(0.0, 2.0);
  const TurboWeights orig{lam, lam, 1.0};
  const double cyc = t[T::D_zt] + lam * t[T::L_xh] + t[T::D_xt] + lam * t[T::L_zh];
  c.violation = std::max(c.violation, std::abs(preset_loss(sys, Preset::CYCLEGAN, orig) - cyc));
  ++c.checks;

  // FLOW on a square system whose decoder is a relabeling.
  const std::size_t n = sys.n_z();
  std::vector<std::size_t> perm(n);
  for (std::size_t k = 0; k < n; ++k) perm[k] = k;
  for (std::size_t k = n; k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
  const TurboSystem flow(random_joint(n, n, rng), random_kernel(n, n, rng), prob::StochasticKernel::permutation(perm));
  const auto [p_x, p_z] = prob::marginals(flow.joint());
  std::vector<double> pushed(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) pushed[perm[k]] += p_z[k];
  const double flow_expected = prob::kld(p_x, prob::FiniteDist(pushed));
  c.violation = std::max(c.violation, std::abs(preset_loss(flow, Preset::FLOW, w) - flow_expected));
  ++c.checks;
  return c;
}

CaseResult paths_case(const VerifyOptions& o, std::size_t i) {
  Rng rng(Rng::derive(o.seed, {kPaths, i}));
  const TurboSystem sys = random_system_sized(o.min_size, o.max_size, rng);
  TurboWeights w{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
  const TermBreakdown t = eight_terms(sys);
  const double direct = turbo_direct(sys, w);
  const double reverse = turbo_reverse(sys, w);
  CaseResult c;
  c.violation = std::abs(direct - (-t.b_direct_enc - w.lambda_d * t.b_direct_dec));
  c.violation = std::max(c.violation, std::abs(reverse - (-t.b_reverse_dec - w.lambda_r * t.b_reverse_enc)));
  const TurboWeights swapped{w.lambda_r, w.lambda_d, w.lambda_t};
  c.violation = std::max(c.violation, std::abs(reverse - turbo_direct(sys.transposed(), swapped)));
  c.violation = std::max(c.violation, std::abs(turbo_total(sys, w) - (direct + w.lambda_t * reverse)));
  c.checks = 4;
  return c;
}

CaseResult identities_case(const VerifyOptions& o, std::size_t i) {
  Rng rng(Rng::derive(o.seed, {kIdentities, i}));
  const std::size_t span = o.max_size - o.min_size + 1;
  const std::size_t n = o.min_size + rng.below(span);
  const auto p = random_dist(n, rng);
  const auto q = random_dist(n, rng);
  const auto k = random_kernel(n, o.min_size + rng.below(span), rng);
  CaseResult c;
  c.violation = std::abs(prob::cross_entropy(p, q) - (prob::entropy(p) + prob::kld(p, q)));
  // I(X; Y) = E_p KL(k(.|x) || pushforward) for the composed joint.
  const auto pushed = prob::push_forward(p, k);
  double expected = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const auto row = k.row(x);
    expected += p[x] * prob::kld(prob::FiniteDist({row.begin(), row.end()}), pushed);
  }
  c.violation = std::max(c.violation, std::abs(prob::mutual_information(prob::compose_joint(p, k)) - expected));
  c.checks = 2;
  return c;
}

}  // namespace

VerifyReport run_verify(const VerifyOptions& o) {
  o.validate();
  const auto start = std::chrono::steady_clock::now();
  VerifyReport report;
  report.options = o;
  auto bind = [&](auto fn) { return [&o, fn](std::size_t i) { return fn(o, i); }; };

  report.properties.push_back(merge("bound_chain", 1e-9, run_cases(o.trials, o.threads, bind(bound_chain_case))));
  report.properties.push_back(merge("bibae_identity", 1e-10, run_cases(o.bibae_systems, o.threads, bind(bibae_case))));
  report.properties.push_back(
      merge("saturation", 1e-9, run_cases(o.saturation_systems, o.threads, bind(saturation_case))));
  report.properties.push_back(merge("preset_decomposition", 1e-12, run_cases(o.trials, o.threads, bind(preset_case))));
  report.properties.push_back(merge("path_identities", 1e-10, run_cases(o.trials, o.threads, bind(paths_case))));
  report.properties.push_back(
      merge("information_identities", 1e-10, run_cases(o.trials, o.threads, bind(identities_case))));

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace turbo::oracle
