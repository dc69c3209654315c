// turbo: oracle checks, training, evaluation and reports.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 validation error,
// 3 property violation, 4 numerical abort.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "turbo/data/synth.hpp"
#include "turbo/eval/metrics.hpp"
#include "turbo/oracle/objectives.hpp"
#include "turbo/oracle/random_system.hpp"
#include "turbo/oracle/system_file.hpp"
#include "turbo/oracle/verify.hpp"
#include "turbo/prob/finite.hpp"
#include "turbo/train/engine.hpp"
#include "turbo/util/format.hpp"
#include "turbo/util/rng.hpp"

namespace fs = std::filesystem;
using namespace turbo;

namespace {

enum Exit : int { kOk = 0, kIo = 1, kValidation = 2, kViolation = 3, kNumerical = 4 };

struct Failure {
  int code;
  std::string message;
};

// ---- oracle eval -----------------------------------------------------------

/// Cross-entropies with zero-probability support are +inf.
template <typename F>
double or_inf(F f) {
  try {
    return f();
  } catch (const prob::SupportError&) {
    return std::numeric_limits<double>::infinity();
  }
}

nlohmann::ordered_json num(double v) {
  if (std::isfinite(v)) return v + 0.0;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

int oracle_eval(const std::string& file, bool json) {
  const auto spec = oracle::load_system(file);
  const auto& sys = spec.system;
  const auto& tw = spec.turbo_weights;
  const auto& iw = spec.ibn_weights;

  nlohmann::ordered_json out;
  nlohmann::ordered_json terms;
  std::array<double, kTermCount> t{};
  for (Term term : kAllTerms) {
    t[static_cast<int>(term)] = or_inf([&] { return oracle::term_value(sys, term); });
    terms[std::string(term_name(term))] = num(t[static_cast<int>(term)]);
  }
  auto T = [&](Term term) { return t[static_cast<int>(term)]; };
  const auto joint = sys.joint();
  const double i_true = prob::mutual_information(joint);
  const double i_enc = prob::mutual_information(oracle::encoder_joint(sys));
  const double i_dec = prob::mutual_information(oracle::decoder_joint(sys));
  out["terms"] = terms;
  out["information"] = {{"I_true", i_true}, {"I_enc", i_enc}, {"I_dec", i_dec}};
  out["bounds"] = {{"direct_enc", num(-T(Term::L_zt) - T(Term::D_zt))},
                   {"direct_dec", num(-T(Term::L_xh) - T(Term::D_xh))},
                   {"reverse_dec", num(-T(Term::L_xt) - T(Term::D_xt))},
                   {"reverse_enc", num(-T(Term::L_zh) - T(Term::D_zh))}};

  nlohmann::ordered_json comp;
  comp["turbo_direct"] = num(or_inf([&] { return oracle::turbo_direct(sys, tw); }));
  comp["turbo_reverse"] = num(or_inf([&] { return oracle::turbo_reverse(sys, tw); }));
  comp["turbo_total"] = num(or_inf([&] { return oracle::turbo_total(sys, tw); }));
  comp["bibae"] = num(or_inf([&] { return oracle::bibae_loss(sys, iw); }));
  comp["bibae_mi_form"] = num(or_inf([&] { return oracle::bibae_loss_mi_form(sys, iw); }));
  comp["vae"] = num(or_inf([&] { return oracle::ibn_family_loss(sys, oracle::IbnVariant::VAE, iw); }));
  comp["infovae"] = num(or_inf([&] { return oracle::ibn_family_loss(sys, oracle::IbnVariant::InfoVAE, iw); }));
  comp["vaegan"] = num(or_inf([&] { return oracle::ibn_family_loss(sys, oracle::IbnVariant::VAEGAN, iw); }));
  comp["alae_term"] = num(or_inf([&] { return oracle::alae_term(sys); }));
  if (spec.sensitive && spec.attacker) {
    comp["leakage"] = num(oracle::sensitive_leakage(*spec.sensitive, sys.encoder()));
    comp["club"] = num(or_inf([&] { return oracle::club_loss(sys, *spec.sensitive, *spec.attacker, iw); }));
  }
  out["composites"] = comp;

  nlohmann::ordered_json presets;
  for (Preset p : {Preset::AAE, Preset::GAN, Preset::WGAN, Preset::PIX2PIX, Preset::CYCLEGAN, Preset::FLOW,
                   Preset::ALAE, Preset::TURBO_FULL}) {
    try {
      presets[std::string(preset_name(p))] = num(or_inf([&] { return oracle::preset_loss(sys, p, tw); }));
    } catch (const oracle::UnsupportedPreset& e) {
      presets[std::string(preset_name(p))] = std::string("n/a: ") + e.what();
    }
  }
  out["presets"] = presets;

  if (json) {
    std::cout << out.dump(2) << '\n';
    return kOk;
  }
  auto show = [](const nlohmann::ordered_json& v) {
    return v.is_number() ? format_exact(v.get<double>()) : v.get<std::string>();
  };
  for (const auto& section : {"terms", "information", "bounds", "composites", "presets"}) {
    fmt::print("[{}]\n", section);
    for (const auto& [k, v] : out[section].items()) fmt::print("  {:<14} {}\n", k, show(v));
  }
  return kOk;
}

// ---- oracle verify / random ------------------------------------------------

int oracle_verify(const oracle::VerifyOptions& opts, const std::string& report_path) {
  opts.validate();
  const auto report = oracle::run_verify(opts);
  for (const auto& p : report.properties) {
    fmt::print("{:<24} {:<4} checks={:<7} max_violation={:.3e} tol={:.0e}{}\n", p.name, p.passed ? "ok" : "FAIL",
               p.checks, p.max_violation, p.tolerance, p.passed ? "" : "  " + p.detail);
  }
  fmt::print("seed={} trials={} sizes={}-{} seconds={:.2f}\n", opts.seed, opts.trials, opts.min_size, opts.max_size,
             report.seconds);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw Failure{kIo, "cannot write " + report_path};
    out << report.to_json().dump(2) << '\n';
  }
  if (!report.all_passed()) {
    for (const auto& p : report.properties)
      if (!p.passed) std::cerr << "property violated: " << p.name << '\n';
    return kViolation;
  }
  return kOk;
}

int oracle_random(std::uint64_t seed, std::size_t nx, std::size_t nz, const std::string& out) {
  Rng rng(seed);
  oracle::DiscreteSystemSpec spec{oracle::random_system(nx, nz, rng), std::nullopt, std::nullopt, {}, {}};
  if (out.empty()) {
    std::cout << oracle::serialize_system(spec);
  } else {
    oracle::save_system(spec, out);
  }
  return kOk;
}

// ---- training --------------------------------------------------------------

int evaluate_and_write(const train::RunState& state, const fs::path& dir, bool print) {
  const auto rec = eval::evaluate_run(state);
  eval::write_eval(dir, rec);
  if (print) std::cout << eval::report_table({{dir.string(), rec}});
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
  bool overwrite = false;
  bool no_eval = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  train::RunState state;
  fs::path dir;
  std::uint64_t until = 0;
  if (!a.resume.empty()) {
    dir = a.resume;
    if (!fs::is_directory(dir)) throw Failure{kIo, "run directory not found: " + dir.string()};
    state = train::resume_run(dir);
    until = a.steps.value_or(state.cfg.steps);
    if (until <= state.step) {
      if (!a.quiet) fmt::print("already at step {}\n", state.step);
      return a.no_eval ? kOk : evaluate_and_write(state, dir, !a.quiet);
    }
  } else {
    if (a.config.empty() || a.out.empty()) throw Failure{kIo, "train needs <config> and --out (or --resume)"};
    auto cfg = train::load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.steps) cfg.steps = *a.steps;
    train::validate(cfg);
    dir = a.out;
    state = train::build_run(cfg);
    train::init_run_dir(dir, cfg, a.overwrite);
    until = cfg.steps;
  }
  if (!a.quiet)
    fmt::print("training {} seed={} from step {} to {} -> {}\n", preset_name(state.cfg.preset), state.cfg.seed,
               state.step, until, dir.string());
  const auto t0 = std::chrono::steady_clock::now();
  train::train(state, until, dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!a.quiet) fmt::print("done in {:.1f} s\n", secs);
  return a.no_eval ? kOk : evaluate_and_write(state, dir, !a.quiet);
}

int cmd_eval(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw Failure{kIo, "run directory not found: " + run_dir};
  if (!fs::exists(dir / "config.resolved.ini")) throw Failure{kIo, "not a run directory: " + run_dir};
  auto state = train::build_run(train::load_config(dir / "config.resolved.ini"));
  const auto ck = train::latest_checkpoint(dir);
  if (!ck) throw Failure{kIo, "no checkpoint in " + run_dir};
  train::restore_checkpoint(state, ad::load_checkpoint(*ck));
  return evaluate_and_write(state, dir, true);
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<std::pair<std::string, eval::MetricsRecord>> runs;
  for (const auto& d : dirs) {
    if (!fs::is_directory(d)) throw Failure{kIo, "run directory not found: " + d};
    runs.emplace_back(fs::path(d).filename().string(), eval::load_summary(d));
  }
  const std::string table = eval::report_table(runs);
  if (out.empty()) {
    std::cout << table;
  } else {
    std::ofstream f(out);
    if (!f) throw Failure{kIo, "cannot write " + out};
    f << table;
  }
  return kOk;
}

int cmd_data(const std::string& config, const std::string& out, std::size_t n, std::optional<std::uint64_t> seed) {
  const auto cfg = train::load_config(config);
  data::dump_dataset(out, cfg.data, n, seed.value_or(cfg.data_seed));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"turbo: two-way information bounds, exact oracle and toy trainer"};
  app.require_subcommand(1);

  auto* oracle_cmd = app.add_subcommand("oracle", "Exact finite-alphabet oracle");
  oracle_cmd->require_subcommand(1);

  oracle::VerifyOptions vopts;
  std::string report_path, fault = "none";
  auto* verify = oracle_cmd->add_subcommand("verify", "Run the property battery on random systems");
  verify->add_option("--trials", vopts.trials, "Random systems for the bound chain")->capture_default_str();
  verify->add_option("--seed", vopts.seed, "Base seed")->capture_default_str();
  verify->add_option("--min-size", vopts.min_size, "Smallest alphabet")->capture_default_str();
  verify->add_option("--max-size", vopts.max_size, "Largest alphabet")->capture_default_str();
  verify->add_option("--saturation-systems", vopts.saturation_systems)->capture_default_str();
  verify->add_option("--perturbations", vopts.perturbations)->capture_default_str();
  verify->add_option("--bibae-systems", vopts.bibae_systems)->capture_default_str();
  verify->add_option("--threads", vopts.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str();
  verify->add_option("--report", report_path, "Write a JSON report here");
  verify->add_option("--inject-fault", fault, "Test hook: none or corrupt-optimum")
      ->check(CLI::IsMember({"none", "corrupt-optimum"}))
      ->capture_default_str();

  std::string system_file;
  bool json = false;
  auto* oeval = oracle_cmd->add_subcommand("eval", "Print every term, bound and composite of a system file");
  oeval->add_option("file", system_file)->required();
  oeval->add_flag("--json", json, "Machine-readable output");

  std::uint64_t rseed = 1;
  std::size_t rnx = 3, rnz = 3;
  std::string rout;
  auto* orand = oracle_cmd->add_subcommand("random", "Write a random system file");
  orand->add_option("--seed", rseed)->capture_default_str();
  orand->add_option("--nx", rnx)->capture_default_str()->check(CLI::PositiveNumber);
  orand->add_option("--nz", rnz)->capture_default_str()->check(CLI::PositiveNumber);
  orand->add_option("--out", rout, "Output path (default stdout)");

  TrainArgs targs;
  auto* tcmd = app.add_subcommand("train", "Train a preset from a config file");
  tcmd->add_option("config", targs.config, "Config file");
  auto* out_opt = tcmd->add_option("--out", targs.out, "Run directory (created or empty)");
  tcmd->add_option("--resume", targs.resume, "Continue the run in this directory from its latest checkpoint")
      ->excludes(out_opt);
  tcmd->add_option("--seed", targs.seed, "Override run.seed");
  tcmd->add_option("--steps", targs.steps, "Override run.steps");
  tcmd->add_flag("--overwrite", targs.overwrite, "Clear a non-empty run directory");
  tcmd->add_flag("--no-eval", targs.no_eval, "Skip the final evaluation");
  tcmd->add_flag("-q,--quiet", targs.quiet, "No progress output");

  std::string eval_dir;
  auto* ecmd = app.add_subcommand("eval", "Evaluate a run directory");
  ecmd->add_option("run_dir", eval_dir)->required();

  std::vector<std::string> report_dirs;
  std::string report_out;
  auto* rcmd = app.add_subcommand("report", "Merge run summaries into one table");
  rcmd->add_option("run_dirs", report_dirs)->required();
  rcmd->add_option("--out", report_out, "Write the table here instead of stdout");

  std::string data_config, data_out;
  std::size_t data_n = 1000;
  std::optional<std::uint64_t> data_seed;
  auto* dcmd = app.add_subcommand("data", "Dump the dataset of a config to a text file");
  dcmd->add_option("config", data_config)->required();
  dcmd->add_option("--out", data_out)->required();
  dcmd->add_option("-n", data_n)->capture_default_str()->check(CLI::PositiveNumber);
  dcmd->add_option("--seed", data_seed, "Override run.data_seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIo;
  }

  try {
    if (verify->parsed()) {
      vopts.fault = fault == "corrupt-optimum" ? oracle::Fault::CorruptOptimum : oracle::Fault::None;
      return oracle_verify(vopts, report_path);
    }
    if (oeval->parsed()) return oracle_eval(system_file, json);
    if (orand->parsed()) return oracle_random(rseed, rnx, rnz, rout);
    if (tcmd->parsed()) return cmd_train(targs);
    if (ecmd->parsed()) return cmd_eval(eval_dir);
    if (rcmd->parsed()) return cmd_report(report_dirs, report_out);
    if (dcmd->parsed()) return cmd_data(data_config, data_out, data_n, data_seed);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const train::NumericalAbort& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const train::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidation;
  } catch (const oracle::SystemFileError& e) {
    std::cerr << "system file error: " << e.what() << '\n';
    return e.line() == 0 ? kIo : kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kIo;
}
