#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "turbo/eval/metrics.hpp"
#include "turbo/util/rng.hpp"

using namespace turbo;
using namespace turbo::eval;
using ad::Tensor;

namespace {

/// Quadratic-time KS: evaluate both empirical CDFs at every pooled value.
double ks_brute(const std::vector<double>& a, const std::vector<double>& b) {
  double best = 0.0;
  for (const auto* pool : {&a, &b})
    for (double t : *pool) {
      const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [t](double v) { return v <= t; })) /
                        static_cast<double>(a.size());
      const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [t](double v) { return v <= t; })) /
                        static_cast<double>(b.size());
      best = std::max(best, std::abs(fa - fb));
    }
  return best;
}

train::RunConfig small(const std::string& preset, const std::string& data = "") {
  std::string family = preset == "GAN" ? "gaussian-ring" : "linear-gaussian";
  return train::parse_config("[run]\npreset = " + preset + "\neval_samples = 400\n[data]\nfamily = " + family + "\n" +
                             data + "[network]\nhidden = 8\ncritic_hidden = 8\n[flow]\nhidden = 8\nblocks = 2\n");
}

}  // namespace

TEST_CASE("ks distance closed cases") {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {3, 4, 5, 6, 7};
  CHECK(ks_distance(a, a) == 0.0);
  CHECK(ks_distance(a, b) == doctest::Approx(0.4));
  CHECK(ks_distance(std::vector<double>{1, 1, 2, 2, 3}, std::vector<double>{1, 2, 2, 3, 3}) == doctest::Approx(0.2));
  CHECK(ks_distance(std::vector<double>{0, 1}, std::vector<double>{5, 6, 7}) == 1.0);
  CHECK(ks_distance(std::vector<double>{2}, std::vector<double>{2, 2, 2}) == 0.0);
  CHECK_THROWS(ks_distance(std::vector<double>{}, b));
}

TEST_CASE("ks distance matches brute force, is symmetric and rank based") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng.below(30)), b(1 + rng.below(30));
    // Coarse values force many ties.
    for (double& v : a) v = static_cast<double>(rng.below(8));
    for (double& v : b) v = static_cast<double>(rng.below(8)) + (trial % 2 ? 0.0 : 0.5);
    const double d = ks_distance(a, b);
    CHECK(d == doctest::Approx(ks_brute(a, b)).epsilon(1e-15));
    CHECK(ks_distance(b, a) == d);
    std::vector<double> ta = a, tb = b;
    for (double& v : ta) v = std::exp(0.3 * v) - 4.0;
    for (double& v : tb) v = std::exp(0.3 * v) - 4.0;
    CHECK(ks_distance(ta, tb) == d);
  }
}

TEST_CASE("mode coverage") {
  const std::vector<std::array<double, 2>> centers = {{{1.0, 0.0}}, {{-1.0, 0.0}}, {{0.0, 1.0}}};
  const Tensor pts({6, 2}, {1.0, 0.0, 1.1, 0.05, -1.0, 0.0, 5.0, 5.0, 0.0, 0.0, 0.0, 1.19});
  const auto f = mode_coverage(pts, centers, 0.2);
  REQUIRE(f.size() == 3);
  CHECK(f[0] == doctest::Approx(2.0 / 6));
  CHECK(f[1] == doctest::Approx(1.0 / 6));
  CHECK(f[2] == doctest::Approx(1.0 / 6));
  // Overlapping balls: each point counts once, toward its nearest center.
  const auto wide = mode_coverage(pts, centers, 10.0);
  double total = 0.0;
  for (double v : wide) total += v;
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS(mode_coverage(pts, centers, 0.0));
  CHECK_THROWS(mode_coverage(Tensor({2, 3}), centers, 0.2));
  CHECK(mse(Tensor({2}, {1.0, 2.0}), Tensor({2}, {0.0, 0.0})) == 2.5);
}

TEST_CASE("evaluate_run reports the metrics each preset produces") {
  SUBCASE("gan on the ring") {
    const auto r = evaluate_run(train::build_run(small("GAN")));
    CHECK(r.has("ks_x_tilde_max"));
    CHECK(r.has("mode_min_fraction"));
    CHECK(r.mode_fractions.size() == 8);
    CHECK_FALSE(r.has("ks_z_tilde_max"));
    CHECK_FALSE(r.has("mse_x_tilde"));
    CHECK(r.get("mode_total_fraction") <= 1.0);
  }
  SUBCASE("full objective on paired data") {
    const auto s = train::build_run(small("TURBO_FULL"));
    const auto r = evaluate_run(s);
    for (const char* k : {"ks_x_tilde_max", "ks_z_tilde_max", "ks_x_hat_max", "ks_z_hat_max", "mse_z_tilde",
                          "mse_x_tilde", "mse_cycle_x", "mse_cycle_z", "baseline_mse_z_tilde"})
      CHECK(r.has(k));
    // Untrained: the baseline is the run itself.
    CHECK(r.get("mse_z_tilde") == r.get("baseline_mse_z_tilde"));
    CHECK(summary_json(evaluate_run(s)) == summary_json(r));
    CHECK_THROWS_AS(r.get("nope"), std::out_of_range);
  }
  SUBCASE("unpaired data omit paired errors") {
    const auto r = evaluate_run(train::build_run(small("CYCLEGAN", "paired = false\n")));
    CHECK_FALSE(r.has("mse_z_tilde"));
    CHECK(r.has("mse_cycle_x"));
  }
  SUBCASE("flow reports its likelihood gap") {
    const auto r = evaluate_run(train::build_run(small("FLOW")));
    CHECK(r.get("nll_gap") == doctest::Approx(r.get("nll") - r.get("entropy_x")));
    // The identity flow on standardized data has NLL near d/2 log(2 pi e).
    CHECK(r.get("nll") == doctest::Approx(std::log(2 * M_PI * M_E)).epsilon(0.05));
  }
}

TEST_CASE("summary json round-trips and reports tabulate") {
  MetricsRecord r;
  r.preset = "GAN";
  r.step = 5000;
  r.seed = 2;
  r.eval_seed = 3;
  r.samples = 10000;
  r.metrics = {{"ks_x_tilde_max", 0.0123456789012345678}, {"mode_min_fraction", 1.0 / 9}};
  r.mode_fractions = {0.1, 0.2};
  const std::string js = summary_json(r);
  const MetricsRecord back = parse_summary_json(js);
  CHECK(summary_json(back) == js);
  CHECK(back.get("mode_min_fraction") == 1.0 / 9);
  CHECK(back.metrics[0].first == "ks_x_tilde_max");
  CHECK_THROWS(parse_summary_json("{"));

  MetricsRecord other = r;
  other.metrics = {{"nll", 2.5}};
  const std::string table = report_table({{"runA", r}, {"runB", other}});
  CHECK(table.find("run\t") == 0);
  CHECK(table.find("nll") != std::string::npos);
  CHECK(table.find("runB") != std::string::npos);
  CHECK(table.find("\t-") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "turbo_test_eval";
  std::filesystem::create_directories(dir);
  write_eval(dir, r);
  CHECK(summary_json(load_summary(dir)) == js);
  CHECK(std::filesystem::exists(dir / "eval.tsv"));
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_summary(dir));
}
