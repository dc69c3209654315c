#include "turbo/data/synth.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numbers>

#include "turbo/util/format.hpp"
#include "turbo/util/rng.hpp"

namespace turbo::data {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

constexpr double kPi = std::numbers::pi;

// Two-moons population moments of the unjittered curve: upper arc
// (cos t, sin t) and lower arc (1 - cos t, 1/2 - sin t), t ~ U(0, pi),
// each with probability 1/2.
constexpr double kMoonMeanX = 0.5;
constexpr double kMoonMeanY = 0.25;
constexpr double kMoonVarX = 0.75;
const double kMoonVarY = 0.5625 - 1.0 / kPi;
const double kMoonCov = 0.125 - 1.0 / kPi;

Mat mixing_matrix(const DatasetSpec& s) {
  Mat a(s.dim_x, s.dim_z);
  for (std::size_t i = 0; i < s.dim_x; ++i)
    for (std::size_t j = 0; j < s.dim_z; ++j) a(i, j) = s.mixing[i * s.dim_z + j];
  return a;
}

/// Linear map from standardized moon coordinates to x (before noise).
Mat moon_map(const DatasetSpec& s) {
  const double c = std::cos(s.rotation), sn = std::sin(s.rotation);
  Mat r(2, 2);
  r << c, -sn, sn, c;
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = s.moon_scale[0];
  d(1, 1) = s.moon_scale[1];
  return r * d;
}

/// Covariance of the standardized moon latent.
Mat moon_latent_cov(const DatasetSpec& s) {
  const double n2 = s.moon_noise * s.moon_noise;
  const double sx = std::sqrt(kMoonVarX + n2), sy = std::sqrt(kMoonVarY + n2);
  Mat c(2, 2);
  c << 1.0, kMoonCov / (sx * sy), kMoonCov / (sx * sy), 1.0;
  return c;
}

Mat cov_x(const DatasetSpec& s) {
  if (s.family == Family::LinearGaussian) {
    Mat a = mixing_matrix(s);
    Vec ls(s.dim_z);
    for (std::size_t j = 0; j < s.dim_z; ++j) ls(j) = s.latent_scale[j] * s.latent_scale[j];
    return a * ls.asDiagonal() * a.transpose() + s.noise * s.noise * Mat::Identity(s.dim_x, s.dim_x);
  }
  Mat m = moon_map(s);
  return m * moon_latent_cov(s) * m.transpose() + s.noise * s.noise * Mat::Identity(2, 2);
}

void check_vec(const std::vector<double>& v, std::size_t n, const char* name) {
  if (v.size() != n) throw DataError(fmt::format("{}: expected {} values, got {}", name, n, v.size()));
  for (double x : v)
    if (!std::isfinite(x)) throw DataError(fmt::format("{}: non-finite value", name));
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::LinearGaussian: return "linear-gaussian";
    case Family::TwoMoons: return "two-moons-map";
    case Family::GaussianRing: return "gaussian-ring";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  if (s == "linear-gaussian") return Family::LinearGaussian;
  if (s == "two-moons-map") return Family::TwoMoons;
  if (s == "gaussian-ring") return Family::GaussianRing;
  throw DataError(fmt::format("unknown family '{}' (expected linear-gaussian, two-moons-map or gaussian-ring)", s));
}

void DatasetSpec::validate() {
  if (dim_x < 1 || dim_z < 1) throw DataError("dimensions must be >= 1");
  if (!(noise >= 0.0)) throw DataError("noise must be >= 0");
  switch (family) {
    case Family::LinearGaussian: {
      if (mixing.empty()) {
        mixing.assign(dim_x * dim_z, 0.0);
        for (std::size_t i = 0; i < std::min(dim_x, dim_z); ++i) mixing[i * dim_z + i] = 1.0;
      }
      if (offset.empty()) offset.assign(dim_x, 0.0);
      if (latent_scale.empty()) latent_scale.assign(dim_z, 1.0);
      check_vec(mixing, dim_x * dim_z, "mixing");
      check_vec(offset, dim_x, "offset");
      check_vec(latent_scale, dim_z, "latent_scale");
      for (double v : latent_scale)
        if (!(v > 0.0)) throw DataError("latent_scale: entries must be positive");
      if (normalize) {
        const Mat c = cov_x(*this);
        for (std::size_t i = 0; i < dim_x; ++i)
          if (!(c(i, i) > 0.0)) throw DataError(fmt::format("x{} has zero variance and cannot be normalized", i));
      }
      break;
    }
    case Family::TwoMoons:
      if (dim_x != 2 || dim_z != 2) throw DataError("two-moons-map: dim_x and dim_z must be 2");
      if (!(moon_noise >= 0.0)) throw DataError("moon_noise must be >= 0");
      check_vec(moon_scale, 2, "moon_scale");
      for (double v : moon_scale)
        if (!(v > 0.0)) throw DataError("moon_scale: entries must be positive");
      break;
    case Family::GaussianRing:
      if (dim_x != 2) throw DataError("gaussian-ring: dim_x must be 2");
      if (modes < 1) throw DataError("modes must be >= 1");
      if (!(radius > 0.0)) throw DataError("radius must be positive");
      if (!(mode_std >= 0.0)) throw DataError("mode_std must be >= 0");
      if (paired) throw DataError("gaussian-ring: data is unpaired by construction; set paired = false");
      break;
  }
}

Standardization standardization(const DatasetSpec& s) {
  Standardization st;
  st.mean_x.assign(s.dim_x, 0.0);
  st.std_x.assign(s.dim_x, 1.0);
  st.mean_z.assign(s.dim_z, 0.0);
  st.std_z.assign(s.dim_z, 1.0);
  if (!s.normalize || s.family == Family::GaussianRing) return st;
  const Mat c = cov_x(s);
  for (std::size_t i = 0; i < s.dim_x; ++i) st.std_x[i] = std::sqrt(c(i, i));
  if (s.family == Family::LinearGaussian) {
    st.mean_x = s.offset;
    st.std_z = s.latent_scale;
  }
  return st;
}

std::vector<std::array<double, 2>> ring_centers(const DatasetSpec& s) {
  std::vector<std::array<double, 2>> out;
  for (std::size_t k = 0; k < s.modes; ++k) {
    const double a = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(s.modes);
    out.push_back({s.radius * std::cos(a), s.radius * std::sin(a)});
  }
  return out;
}

PairedBatch sample(const DatasetSpec& spec_in, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw DataError("sample: n must be >= 1");
  DatasetSpec s = spec_in;
  s.validate();
  Rng rng(seed);
  PairedBatch out{Tensor({n, s.dim_x}), Tensor({n, s.dim_z}), s.paired};
  const Standardization st = standardization(s);

  switch (s.family) {
    case Family::LinearGaussian: {
      std::vector<double> z(s.dim_z);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < s.dim_z; ++j) z[j] = s.latent_scale[j] * rng.normal();
        for (std::size_t i = 0; i < s.dim_x; ++i) {
          double v = s.offset[i];
          for (std::size_t j = 0; j < s.dim_z; ++j) v += s.mixing[i * s.dim_z + j] * z[j];
          v += s.noise * rng.normal();
          out.x.at(r, i) = (v - st.mean_x[i]) / st.std_x[i];
        }
        for (std::size_t j = 0; j < s.dim_z; ++j) out.z.at(r, j) = (z[j] - st.mean_z[j]) / st.std_z[j];
      }
      break;
    }
    case Family::TwoMoons: {
      const Mat m = moon_map(s);
      const double n2 = s.moon_noise * s.moon_noise;
      const double sx = std::sqrt(kMoonVarX + n2), sy = std::sqrt(kMoonVarY + n2);
      for (std::size_t r = 0; r < n; ++r) {
        const double t = kPi * rng.uniform();
        double px, py;
        if (rng.below(2) == 0) {
          px = std::cos(t);
          py = std::sin(t);
        } else {
          px = 1.0 - std::cos(t);
          py = 0.5 - std::sin(t);
        }
        px += s.moon_noise * rng.normal();
        py += s.moon_noise * rng.normal();
        const double z0 = (px - kMoonMeanX) / sx;
        const double z1 = (py - kMoonMeanY) / sy;
        out.z.at(r, 0) = z0;
        out.z.at(r, 1) = z1;
        for (std::size_t i = 0; i < 2; ++i) {
          const double v = m(i, 0) * z0 + m(i, 1) * z1 + s.noise * rng.normal();
          out.x.at(r, i) = (v - st.mean_x[i]) / st.std_x[i];
        }
      }
      break;
    }
    case Family::GaussianRing: {
      const auto centers = ring_centers(s);
      for (std::size_t r = 0; r < n; ++r) {
        const auto& c = centers[rng.below(centers.size())];
        out.x.at(r, 0) = c[0] + s.mode_std * rng.normal();
        out.x.at(r, 1) = c[1] + s.mode_std * rng.normal();
        for (std::size_t j = 0; j < s.dim_z; ++j) out.z.at(r, j) = rng.normal();
      }
      break;
    }
  }

  if (!s.paired && s.family != Family::GaussianRing) {
    // Fisher-Yates over z rows.
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t j = rng.below(i + 1);
      if (j == i) continue;
      for (std::size_t c = 0; c < s.dim_z; ++c) std::swap(out.z.at(i, c), out.z.at(j, c));
    }
  }
  return out;
}

AnalyticReference analytic_reference(const DatasetSpec& spec_in) {
  DatasetSpec s = spec_in;
  s.validate();
  if (s.family != Family::LinearGaussian) {
    throw DataError(fmt::format("analytic_reference: unsupported family {}", family_name(s.family)));
  }
  if (!(s.noise > 0.0)) throw DataError("analytic_reference: noise = 0 gives infinite mutual information");
  const Mat c = cov_x(s);
  const double dx = static_cast<double>(s.dim_x), dz = static_cast<double>(s.dim_z);
  const double log2pie = std::log(2.0 * kPi * std::numbers::e);
  const double logdet_x = Eigen::LLT<Mat>(c).matrixLLT().diagonal().array().log().sum() * 2.0;
  double logdet_z = 0.0;
  for (double v : s.latent_scale) logdet_z += 2.0 * std::log(v);

  AnalyticReference ref;
  ref.entropy_x = 0.5 * (dx * log2pie + logdet_x);
  ref.entropy_z = 0.5 * (dz * log2pie + logdet_z);
  ref.mutual_information = 0.5 * (logdet_x - dx * std::log(s.noise * s.noise));
  const Standardization st = standardization(s);
  for (double v : st.std_x) ref.entropy_x -= std::log(v);
  for (double v : st.std_z) ref.entropy_z -= std::log(v);
  return ref;
}

std::string describe(const DatasetSpec& s) {
  auto join = [](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + format_exact(v[i]);
    return out;
  };
  std::string out = fmt::format("family={} dim_x={} dim_z={} noise={} paired={} normalize={}", family_name(s.family),
                                s.dim_x, s.dim_z, format_exact(s.noise), s.paired, s.normalize);
  switch (s.family) {
    case Family::LinearGaussian:
      out += fmt::format(" mixing=[{}] offset=[{}] latent_scale=[{}]", join(s.mixing), join(s.offset),
                         join(s.latent_scale));
      break;
    case Family::TwoMoons:
      out += fmt::format(" moon_noise={} rotation={} moon_scale=[{}]", format_exact(s.moon_noise),
                         format_exact(s.rotation), join(s.moon_scale));
      break;
    case Family::GaussianRing:
      out += fmt::format(" modes={} radius={} mode_std={}", s.modes, format_exact(s.radius),
                         format_exact(s.mode_std));
      break;
  }
  return out;
}

void dump_dataset(const std::filesystem::path& path, const DatasetSpec& spec, std::size_t n, std::uint64_t seed) {
  DatasetSpec s = spec;
  s.validate();
  const PairedBatch b = sample(s, n, seed);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# turbo dataset\n# " << describe(s) << "\n# seed=" << seed << " n=" << n << "\n";
  for (std::size_t i = 0; i < s.dim_x; ++i) out << (i ? "\t" : "") << "x" << i;
  for (std::size_t j = 0; j < s.dim_z; ++j) out << "\tz" << j;
  out << '\n';
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < s.dim_x; ++i) out << (i ? "\t" : "") << format_exact(b.x.at(r, i));
    for (std::size_t j = 0; j < s.dim_z; ++j) out << '\t' << format_exact(b.z.at(r, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace turbo::data
