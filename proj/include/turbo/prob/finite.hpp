#pragma once

// Exact probability calculus over finite alphabets. All information
// quantities are in nats, and 0 log 0 is taken to be 0.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace turbo::prob {

/// Sum-to-one tolerance used by every validating constructor.
inline constexpr double kSumTolerance = 1e-12;

/// Raised when an expectation of log q is taken where p > 0 but q = 0.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised by constructors when the probability invariants do not hold.
class InvalidDistribution : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FiniteDist {
 public:
  /// Validates non-negativity and unit mass.
  explicit FiniteDist(std::vector<double> pmf);

  static FiniteDist uniform(std::size_t n);
  static FiniteDist point_mass(std::size_t n, std::size_t k);

  std::size_t size() const { return pmf_.size(); }
  double operator[](std::size_t i) const { return pmf_[i]; }
  std::span<const double> pmf() const { return pmf_; }

 private:
  std::vector<double> pmf_;
};

/// Row-stochastic matrix: row i is the conditional distribution given input i.
class StochasticKernel {
 public:
  StochasticKernel(std::size_t n_in, std::size_t n_out, std::vector<double> row_major);
  explicit StochasticKernel(const std::vector<std::vector<double>>& rows);

  static StochasticKernel identity(std::size_t n);
  /// Every row equal to `row`.
  static StochasticKernel constant(std::size_t n_in, const FiniteDist& row);
  /// Deterministic kernel sending input i to output perm[i].
  static StochasticKernel permutation(const std::vector<std::size_t>& perm);

  std::size_t n_in() const { return n_in_; }
  std::size_t n_out() const { return n_out_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_out_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * n_out_, n_out_);
  }
  std::span<const double> data() const { return data_; }

  /// True when every row is a point mass and the map is a bijection.
  bool is_permutation() const;

 private:
  struct NoCheck {};
  StochasticKernel(NoCheck, std::size_t n_in, std::size_t n_out, std::vector<double> row_major);

  std::size_t n_in_ = 0;
  std::size_t n_out_ = 0;
  std::vector<double> data_;
};

/// Joint pmf over X (rows) and Z (columns).
class FiniteJoint {
 public:
  FiniteJoint(std::size_t n_x, std::size_t n_z, std::vector<double> row_major);
  explicit FiniteJoint(const std::vector<std::vector<double>>& rows);

  static FiniteJoint product(const FiniteDist& p_x, const FiniteDist& p_z);
  static FiniteJoint diagonal_uniform(std::size_t n);

  std::size_t n_x() const { return n_x_; }
  std::size_t n_z() const { return n_z_; }
  double operator()(std::size_t x, std::size_t z) const { return data_[x * n_z_ + z]; }
  std::span<const double> data() const { return data_; }

  /// Swaps the roles of X and Z.
  FiniteJoint transposed() const;

 private:
  std::size_t n_x_ = 0;
  std::size_t n_z_ = 0;
  std::vector<double> data_;
};

/// Joint pmf over (X, Z, S) with S a sensitive attribute; layout [x][z][s].
class FiniteJointWithSensitive {
 public:
  FiniteJointWithSensitive(std::size_t n_x, std::size_t n_z, std::size_t n_s, std::vector<double> data);

  std::size_t n_x() const { return n_x_; }
  std::size_t n_z() const { return n_z_; }
  std::size_t n_s() const { return n_s_; }
  double operator()(std::size_t x, std::size_t z, std::size_t s) const {
    return data_[(x * n_z_ + z) * n_s_ + s];
  }
  std::span<const double> data() const { return data_; }

  /// Sums out S.
  FiniteJoint joint_xz() const;
  /// Sums out Z; rows X, columns S.
  FiniteJoint joint_xs() const;

 private:
  std::size_t n_x_ = 0;
  std::size_t n_z_ = 0;
  std::size_t n_s_ = 0;
  std::vector<double> data_;
};

enum class Conditioning {
  ZGivenX,  ///< kernel X -> Z, rows indexed by x
  XGivenZ,  ///< kernel Z -> X, rows indexed by z
};

enum class ZeroMassPolicy {
  UniformRow,  ///< default: a zero-mass conditioning symbol gets a uniform row
  Throw,
};

class ZeroMassError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double entropy(const FiniteDist& d);
double cross_entropy(const FiniteDist& p, const FiniteDist& q);
double kld(const FiniteDist& p, const FiniteDist& q);
double mutual_information(const FiniteJoint& j);

/// H(X, Z) of the table itself.
double joint_entropy(const FiniteJoint& j);

std::pair<FiniteDist, FiniteDist> marginals(const FiniteJoint& j);

StochasticKernel conditional_from_joint(const FiniteJoint& j, Conditioning direction,
                                        ZeroMassPolicy policy = ZeroMassPolicy::UniformRow);

/// Output marginal d^T K.
FiniteDist push_forward(const FiniteDist& d, const StochasticKernel& k);

/// table[i][j] = d[i] * k[i][j]; rows follow the kernel's input alphabet.
FiniteJoint compose_joint(const FiniteDist& d, const StochasticKernel& k);

/// -sum_ij w[i][j] log k[i][j] for a weight table laid out like the kernel.
/// Zero weights contribute nothing; a positive weight on a zero entry is a
/// SupportError.
double expected_neg_log(std::span<const double> weights, const StochasticKernel& k);

}  // namespace turbo::prob
