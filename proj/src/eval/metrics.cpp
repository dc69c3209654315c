#include "turbo/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "turbo/util/format.hpp"
#include "turbo/util/rng.hpp"

namespace turbo::eval {

using ad::Tensor;

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

std::vector<double> mode_coverage(const Tensor& samples, const std::vector<std::array<double, 2>>& centers,
                                  double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("mode_coverage: radius must be positive");
  if (samples.rank() != 2 || samples.dim(1) != 2) throw ad::ShapeError("mode_coverage: samples must be [n, 2]");
  std::vector<double> counts(centers.size(), 0.0);
  const std::size_t n = samples.dim(0);
  const double r2 = radius * radius;
  for (std::size_t r = 0; r < n; ++r) {
    // Nearest center only, so overlapping balls never double count.
    std::size_t best = centers.size();
    double best_d = r2;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double dx = samples.at(r, 0) - centers[k][0], dy = samples.at(r, 1) - centers[k][1];
      const double d2 = dx * dx + dy * dy;
      if (d2 <= best_d) {
        best_d = d2;
        best = k;
      }
    }
    if (best < centers.size()) counts[best] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(n);
  return counts;
}

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ad::ShapeError("mse: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.numel());
}

double MetricsRecord::get(const std::string& name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw std::out_of_range("metric not present: " + name);
}

bool MetricsRecord::has(const std::string& name) const {
  return std::any_of(metrics.begin(), metrics.end(), [&](const auto& kv) { return kv.first == name; });
}

namespace {

std::vector<double> column(const Tensor& t, std::size_t c) {
  std::vector<double> out(t.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = t.at(r, c);
  return out;
}

void add_ks(MetricsRecord& rec, const std::string& name, const Tensor& generated, const Tensor& real) {
  double worst = 0.0;
  for (std::size_t c = 0; c < real.dim(1); ++c) {
    const double d = ks_distance(column(generated, c), column(real, c));
    rec.metrics.emplace_back(fmt::format("ks_{}_{}", name, c), d);
    worst = std::max(worst, d);
  }
  rec.metrics.emplace_back(fmt::format("ks_{}_max", name), worst);
}

void add_mse(MetricsRecord& rec, const train::Outputs& o, const data::PairedBatch& b, const std::string& prefix) {
  if (b.paired && o.z_tilde) rec.metrics.emplace_back(prefix + "mse_z_tilde", mse(*o.z_tilde, b.z));
  if (b.paired && o.x_tilde) rec.metrics.emplace_back(prefix + "mse_x_tilde", mse(*o.x_tilde, b.x));
  if (o.x_hat) rec.metrics.emplace_back(prefix + "mse_cycle_x", mse(*o.x_hat, b.x));
  if (o.z_hat) rec.metrics.emplace_back(prefix + "mse_cycle_z", mse(*o.z_hat, b.z));
}

}  // namespace

MetricsRecord evaluate_run(const train::RunState& s) {
  const auto& cfg = s.cfg;
  MetricsRecord rec;
  rec.preset = std::string(preset_name(cfg.preset));
  rec.step = s.step;
  rec.seed = cfg.seed;
  rec.eval_seed = cfg.eval_seed;
  rec.samples = cfg.eval_samples;

  const data::PairedBatch b = data::sample(cfg.data, cfg.eval_samples, Rng::derive(cfg.eval_seed, {0}));
  const std::uint64_t nseed = Rng::derive(cfg.eval_seed, {1});
  const train::Outputs o = train::forward_all(s, b.x, b.z, nseed);

  if (o.x_tilde) add_ks(rec, "x_tilde", *o.x_tilde, b.x);
  if (o.z_tilde) add_ks(rec, "z_tilde", *o.z_tilde, b.z);
  if (o.x_hat) add_ks(rec, "x_hat", *o.x_hat, b.x);
  if (o.z_hat) add_ks(rec, "z_hat", *o.z_hat, b.z);
  add_mse(rec, o, b, "");

  const train::RunState fresh = train::build_run(cfg);
  add_mse(rec, train::forward_all(fresh, b.x, b.z, nseed), b, "baseline_");

  if (s.needs.flow) {
    const double nll = train::flow_nll_value(s, b.x);
    rec.metrics.emplace_back("nll", nll);
    if (cfg.data.family == data::Family::LinearGaussian && cfg.data.noise > 0.0) {
      const double h = data::analytic_reference(cfg.data).entropy_x;
      rec.metrics.emplace_back("entropy_x", h);
      rec.metrics.emplace_back("nll_gap", nll - h);
    }
  }
  if (cfg.data.family == data::Family::GaussianRing && o.x_tilde && cfg.data.dim_x == 2) {
    rec.mode_fractions = mode_coverage(*o.x_tilde, data::ring_centers(cfg.data), cfg.mode_radius);
    const double lo = *std::min_element(rec.mode_fractions.begin(), rec.mode_fractions.end());
    double total = 0.0;
    for (double f : rec.mode_fractions) total += f;
    rec.metrics.emplace_back("mode_min_fraction", lo);
    rec.metrics.emplace_back("mode_total_fraction", total);
  }
  return rec;
}

std::string summary_json(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["preset"] = r.preset;
  j["step"] = r.step;
  j["seed"] = r.seed;
  j["eval_seed"] = r.eval_seed;
  j["samples"] = r.samples;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) m[k] = v;
  j["metrics"] = m;
  j["mode_fractions"] = r.mode_fractions;
  return j.dump(2) + "\n";
}

MetricsRecord parse_summary_json(const std::string& text) {
  const auto j = nlohmann::ordered_json::parse(text);
  MetricsRecord r;
  r.preset = j.at("preset").get<std::string>();
  r.step = j.at("step").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.eval_seed = j.at("eval_seed").get<std::uint64_t>();
  r.samples = j.at("samples").get<std::size_t>();
  for (const auto& [k, v] : j.at("metrics").items()) r.metrics.emplace_back(k, v.get<double>());
  r.mode_fractions = j.at("mode_fractions").get<std::vector<double>>();
  return r;
}

void write_eval(const std::filesystem::path& dir, const MetricsRecord& r) {
  std::ofstream(dir / "summary.json") << summary_json(r);
  std::ofstream tsv(dir / "eval.tsv");
  tsv << "metric\tvalue\n";
  for (const auto& [k, v] : r.metrics) tsv << k << '\t' << format_exact(v) << '\n';
  for (std::size_t i = 0; i < r.mode_fractions.size(); ++i)
    tsv << "mode_fraction_" << i << '\t' << format_exact(r.mode_fractions[i]) << '\n';
}

MetricsRecord load_summary(const std::filesystem::path& dir) {
  std::ifstream in(dir / "summary.json");
  if (!in) throw std::runtime_error("no summary.json in " + dir.string() + " (run `turbo eval` first)");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_summary_json(buf.str());
}

std::string report_table(const std::vector<std::pair<std::string, MetricsRecord>>& runs) {
  std::vector<std::string> cols;
  for (const auto& [_, r] : runs)
    for (const auto& [k, v] : r.metrics)
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  std::string out = "run\tpreset\tstep";
  for (const auto& c : cols) out += "\t" + c;
  out += '\n';
  for (const auto& [name, r] : runs) {
    out += fmt::format("{}\t{}\t{}", name, r.preset, r.step);
    for (const auto& c : cols) out += "\t" + (r.has(c) ? fmt::format("{:.6g}", r.get(c)) : std::string("-"));
    out += '\n';
  }
  return out;
}

}  // namespace turbo::eval
