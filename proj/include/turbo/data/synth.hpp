#pragma once

// Synthetic paired data with known ground truth.
//
// linear-gaussian  z ~ N(0, diag(latent_scale^2)), x = A z + b + eps,
//                  eps ~ N(0, noise^2 I).
// two-moons-map    z = standardized two-moons point (moon_noise jitter),
//                  x = R(rotation) diag(scale) z + eps.
// gaussian-ring    z ~ N(0, I) is generator input only; x is drawn from
//                  `modes` Gaussians of std mode_std spaced on a circle.
//
// With normalize = true (default) the first two families are shifted and
// scaled per coordinate by their exact population moments, so every column
// has zero mean and unit variance. The ring already has unit-scale radius.

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbo/ad/tensor.hpp"

namespace turbo::data {

using ad::Tensor;

enum class Family { LinearGaussian, TwoMoons, GaussianRing };

std::string family_name(Family f);
Family parse_family(const std::string& s);

struct DatasetSpec {
  Family family = Family::LinearGaussian;
  std::size_t dim_x = 2;
  std::size_t dim_z = 2;
  double noise = 0.1;
  /// Row-major [dim_x, dim_z]; empty means the identity-padded default.
  std::vector<double> mixing;
  /// Length dim_x; empty means zeros.
  std::vector<double> offset;
  /// Length dim_z; empty means ones.
  std::vector<double> latent_scale;
  double moon_noise = 0.1;
  double rotation = 0.6;
  std::vector<double> moon_scale{1.0, 0.5};
  std::size_t modes = 8;
  double radius = 1.0;
  double mode_std = 0.05;
  bool paired = true;
  bool normalize = true;

  /// Fills empty defaults and checks ranges; throws std::invalid_argument.
  void validate();
};

class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PairedBatch {
  Tensor x;  // [n, dim_x]
  Tensor z;  // [n, dim_z]
  bool paired = true;
};

/// Deterministic per (spec, n, seed). In unpaired mode the z rows are
/// shuffled independently of x.
PairedBatch sample(const DatasetSpec& spec, std::size_t n, std::uint64_t seed);

/// Differential entropies and mutual information in nats, for the data
/// exactly as `sample` returns it (after normalization).
struct AnalyticReference {
  double mutual_information = 0.0;
  double entropy_x = 0.0;
  double entropy_z = 0.0;
};

/// linear-gaussian only; noise must be positive.
AnalyticReference analytic_reference(const DatasetSpec& spec);

/// Exact mean and per-coordinate standard deviation applied by normalization.
struct Standardization {
  std::vector<double> mean_x, std_x, mean_z, std_z;
};
Standardization standardization(const DatasetSpec& spec);

/// Mode centers of the gaussian-ring family.
std::vector<std::array<double, 2>> ring_centers(const DatasetSpec& spec);

/// Tab-separated dump: '#' header lines echoing the dataset settings and seed, then a
/// column header x0.. z0.., then one row per sample.
void dump_dataset(const std::filesystem::path& path, const DatasetSpec& spec, std::size_t n, std::uint64_t seed);
std::string describe(const DatasetSpec& spec);

}  // namespace turbo::data
