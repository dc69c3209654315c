#include "turbo/prob/finite.hpp"

#include <cmath>
#include <fmt/format.h>

namespace turbo::prob {

namespace {

void check_entries(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidDistribution(fmt::format("{}: entry {} is {} (must be finite and >= 0)", what, i, v));
    }
  }
}

void check_mass(std::span<const double> values, const char* what, std::size_t row) {
  double total = 0.0;
  for (double v : values) total += v;
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InvalidDistribution(fmt::format("{}: row {} sums to {:.17g}, not 1", what, row, total));
  }
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows, std::size_t& n_cols) {
  if (rows.empty()) throw InvalidDistribution("empty table");
  n_cols = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * n_cols);
  for (const auto& r : rows) {
    if (r.size() != n_cols) throw DimensionMismatch("ragged table rows");
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace

FiniteDist::FiniteDist(std::vector<double> pmf) : pmf_(std::move(pmf)) {
  if (pmf_.empty()) throw InvalidDistribution("FiniteDist: empty alphabet");
  check_entries(pmf_, "FiniteDist");
  check_mass(pmf_, "FiniteDist", 0);
}

FiniteDist FiniteDist::uniform(std::size_t n) { return FiniteDist(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

FiniteDist FiniteDist::point_mass(std::size_t n, std::size_t k) {
  if (k >= n) throw DimensionMismatch("point_mass: symbol out of range");
  std::vector<double> p(n, 0.0);
  p[k] = 1.0;
  return FiniteDist(std::move(p));
}

StochasticKernel::StochasticKernel(NoCheck, std::size_t n_in, std::size_t n_out, std::vector<double> row_major)
    : n_in_(n_in), n_out_(n_out), data_(std::move(row_major)) {
  if (n_in_ == 0 || n_out_ == 0) throw InvalidDistribution("StochasticKernel: empty alphabet");
  if (data_.size() != n_in_ * n_out_) throw DimensionMismatch("StochasticKernel: size mismatch");
}

StochasticKernel::StochasticKernel(std::size_t n_in, std::size_t n_out, std::vector<double> row_major)
    : StochasticKernel(NoCheck{}, n_in, n_out, std::move(row_major)) {
  check_entries(data_, "StochasticKernel");
  for (std::size_t i = 0; i < n_in_; ++i) check_mass(row(i), "StochasticKernel", i);
}

StochasticKernel::StochasticKernel(const std::vector<std::vector<double>>& rows)
    : StochasticKernel(rows.size(), rows.empty() ? 0 : rows.front().size(), [&] {
        std::size_t n_cols = 0;
        return flatten(rows, n_cols);
      }()) {}

StochasticKernel StochasticKernel::identity(std::size_t n) {
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return StochasticKernel(n, n, std::move(d));
}

StochasticKernel StochasticKernel::constant(std::size_t n_in, const FiniteDist& row) {
  std::vector<double> d;
  d.reserve(n_in * row.size());
  for (std::size_t i = 0; i < n_in; ++i) d.insert(d.end(), row.pmf().begin(), row.pmf().end());
  return StochasticKernel(n_in, row.size(), std::move(d));
}

StochasticKernel StochasticKernel::permutation(const std::vector<std::size_t>& perm) {
  const std::size_t n = perm.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (perm[i] >= n) throw DimensionMismatch("permutation: target out of range");
    d[i * n + perm[i]] = 1.0;
  }
  StochasticKernel k(n, n, std::move(d));
  if (!k.is_permutation()) throw InvalidDistribution("permutation: not a bijection");
  return k;
}

bool StochasticKernel::is_permutation() const {
  if (n_in_ != n_out_) return false;
  std::vector<int> hits(n_out_, 0);
  for (std::size_t i = 0; i < n_in_; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < n_out_; ++j) {
      const double v = (*this)(i, j);
      if (v == 1.0) {
        ++ones;
        ++hits[j];
      } else if (v != 0.0) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  for (int h : hits)
    if (h != 1) return false;
  return true;
}

FiniteJoint::FiniteJoint(std::size_t n_x, std::size_t n_z, std::vector<double> row_major)
    : n_x_(n_x), n_z_(n_z), data_(std::move(row_major)) {
  if (n_x_ == 0 || n_z_ == 0) throw InvalidDistribution("FiniteJoint: empty alphabet");
  if (data_.size() != n_x_ * n_z_) throw DimensionMismatch("FiniteJoint: size mismatch");
  check_entries(data_, "FiniteJoint");
  check_mass(data_, "FiniteJoint", 0);
}

FiniteJoint::FiniteJoint(const std::vector<std::vector<double>>& rows)
    : FiniteJoint(rows.size(), rows.empty() ? 0 : rows.front().size(), [&] {
        std::size_t n_cols = 0;
        return flatten(rows, n_cols);
      }()) {}

FiniteJoint FiniteJoint::product(const FiniteDist& p_x, const FiniteDist& p_z) {
  std::vector<double> d(p_x.size() * p_z.size());
  for (std::size_t i = 0; i < p_x.size(); ++i)
    for (std::size_t j = 0; j < p_z.size(); ++j) d[i * p_z.size() + j] = p_x[i] * p_z[j];
  return FiniteJoint(p_x.size(), p_z.size(), std::move(d));
}

FiniteJoint FiniteJoint::diagonal_uniform(std::size_t n) {
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0 / static_cast<double>(n);
  return FiniteJoint(n, n, std::move(d));
}

FiniteJoint FiniteJoint::transposed() const {
  std::vector<double> d(data_.size());
  for (std::size_t i = 0; i < n_x_; ++i)
    for (std::size_t j = 0; j < n_z_; ++j) d[j * n_x_ + i] = data_[i * n_z_ + j];
  return FiniteJoint(n_z_, n_x_, std::move(d));
}

FiniteJointWithSensitive::FiniteJointWithSensitive(std::size_t n_x, std::size_t n_z, std::size_t n_s,
                                                   std::vector<double> data)
    : n_x_(n_x), n_z_(n_z), n_s_(n_s), data_(std::move(data)) {
  if (n_x_ == 0 || n_z_ == 0 || n_s_ == 0) throw InvalidDistribution("FiniteJointWithSensitive: empty alphabet");
  if (data_.size() != n_x_ * n_z_ * n_s_) throw DimensionMismatch("FiniteJointWithSensitive: size mismatch");
  check_entries(data_, "FiniteJointWithSensitive");
  check_mass(data_, "FiniteJointWithSensitive", 0);
}

FiniteJoint FiniteJointWithSensitive::joint_xz() const {
  std::vector<double> d(n_x_ * n_z_, 0.0);
  for (std::size_t x = 0; x < n_x_; ++x)
    for (std::size_t z = 0; z < n_z_; ++z)
      for (std::size_t s = 0; s < n_s_; ++s) d[x * n_z_ + z] += (*this)(x, z, s);
  return FiniteJoint(n_x_, n_z_, std::move(d));
}

FiniteJoint FiniteJointWithSensitive::joint_xs() const {
  std::vector<double> d(n_x_ * n_s_, 0.0);
  for (std::size_t x = 0; x < n_x_; ++x)
    for (std::size_t z = 0; z < n_z_; ++z)
      for (std::size_t s = 0; s < n_s_; ++s) d[x * n_s_ + s] += (*this)(x, z, s);
  return FiniteJoint(n_x_, n_s_, std::move(d));
}

double entropy(const FiniteDist& d) {
  double h = 0.0;
  for (double p : d.pmf())
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double cross_entropy(const FiniteDist& p, const FiniteDist& q) {
  if (p.size() != q.size()) throw DimensionMismatch("cross_entropy: alphabet sizes differ");
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw SupportError(fmt::format("cross_entropy: p[{}] > 0 but q[{}] = 0", i, i));
    h -= p[i] * std::log(q[i]);
  }
  return h;
}

double kld(const FiniteDist& p, const FiniteDist& q) {
  if (p.size() != q.size()) throw DimensionMismatch("kld: alphabet sizes differ");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw SupportError(fmt::format("kld: p[{}] > 0 but q[{}] = 0", i, i));
    d += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative residue when p == q.
  return d < 0.0 ? 0.0 : d;
}

double joint_entropy(const FiniteJoint& j) {
  double h = 0.0;
  for (double p : j.data())
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

std::pair<FiniteDist, FiniteDist> marginals(const FiniteJoint& j) {
  std::vector<double> px(j.n_x(), 0.0);
  std::vector<double> pz(j.n_z(), 0.0);
  for (std::size_t x = 0; x < j.n_x(); ++x)
    for (std::size_t z = 0; z < j.n_z(); ++z) {
      px[x] += j(x, z);
      pz[z] += j(x, z);
    }
  return {FiniteDist(std::move(px)), FiniteDist(std::move(pz))};
}

double mutual_information(const FiniteJoint& j) {
  const auto [px, pz] = marginals(j);
  double mi = 0.0;
  for (std::size_t x = 0; x < j.n_x(); ++x)
    for (std::size_t z = 0; z < j.n_z(); ++z) {
      const double p = j(x, z);
      if (p > 0.0) mi += p * std::log(p / (px[x] * pz[z]));
    }
  return mi < 0.0 ? 0.0 : mi;
}

StochasticKernel conditional_from_joint(const FiniteJoint& j, Conditioning direction, ZeroMassPolicy policy) {
  const bool z_given_x = direction == Conditioning::ZGivenX;
  const std::size_t n_in = z_given_x ? j.n_x() : j.n_z();
  const std::size_t n_out = z_given_x ? j.n_z() : j.n_x();
  auto at = [&](std::size_t in, std::size_t out) { return z_given_x ? j(in, out) : j(out, in); };

  std::vector<double> d(n_in * n_out);
  for (std::size_t i = 0; i < n_in; ++i) {
    double mass = 0.0;
    for (std::size_t o = 0; o < n_out; ++o) mass += at(i, o);
    if (mass == 0.0) {
      if (policy == ZeroMassPolicy::Throw) {
        throw ZeroMassError(fmt::format("conditional_from_joint: conditioning symbol {} has zero mass", i));
      }
      for (std::size_t o = 0; o < n_out; ++o) d[i * n_out + o] = 1.0 / static_cast<double>(n_out);
      continue;
    }
    for (std::size_t o = 0; o < n_out; ++o) d[i * n_out + o] = at(i, o) / mass;
  }
  return StochasticKernel(n_in, n_out, std::move(d));
}

FiniteDist push_forward(const FiniteDist& d, const StochasticKernel& k) {
  if (d.size() != k.n_in()) throw DimensionMismatch("push_forward: distribution size != kernel input size");
  std::vector<double> out(k.n_out(), 0.0);
  for (std::size_t i = 0; i < k.n_in(); ++i) {
    if (d[i] == 0.0) continue;
    for (std::size_t j = 0; j < k.n_out(); ++j) out[j] += d[i] * k(i, j);
  }
  return FiniteDist(std::move(out));
}

FiniteJoint compose_joint(const FiniteDist& d, const StochasticKernel& k) {
  if (d.size() != k.n_in()) throw DimensionMismatch("compose_joint: distribution size != kernel input size");
  std::vector<double> t(k.n_in() * k.n_out());
  for (std::size_t i = 0; i < k.n_in(); ++i)
    for (std::size_t j = 0; j < k.n_out(); ++j) t[i * k.n_out() + j] = d[i] * k(i, j);
  return FiniteJoint(k.n_in(), k.n_out(), std::move(t));
}

double expected_neg_log(std::span<const double> weights, const StochasticKernel& k) {
  if (weights.size() != k.n_in() * k.n_out()) throw DimensionMismatch("expected_neg_log: weight table size");
  double acc = 0.0;
  for (std::size_t i = 0; i < k.n_in(); ++i)
    for (std::size_t j = 0; j < k.n_out(); ++j) {
      const double w = weights[i * k.n_out() + j];
      if (w == 0.0) continue;
      const double q = k(i, j);
      if (q <= 0.0) throw SupportError(fmt::format("expected_neg_log: weight on ({}, {}) but kernel entry is 0", i, j));
      acc -= w * std::log(q);
    }
  return acc;
}

}  // namespace turbo::prob
