#include "turbo/oracle/random_system.hpp"

namespace turbo::oracle {

namespace {
std::vector<double> simplex_point(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& e : v) {
    e = rng.exponential();
    total += e;
  }
  for (auto& e : v) e /= total;
  return v;
}
}  // namespace

prob::FiniteDist random_dist(std::size_t n, Rng& rng) { return prob::FiniteDist(simplex_point(n, rng)); }

prob::StochasticKernel random_kernel(std::size_t n_in, std::size_t n_out, Rng& rng) {
  std::vector<double> d;
  d.reserve(n_in * n_out);
  for (std::size_t i = 0; i < n_in; ++i) {
    const auto row = simplex_point(n_out, rng);
    d.insert(d.end(), row.begin(), row.end());
  }
  return prob::StochasticKernel(n_in, n_out, std::move(d));
}

prob::FiniteJoint random_joint(std::size_t n_x, std::size_t n_z, Rng& rng) {
  return prob::FiniteJoint(n_x, n_z, simplex_point(n_x * n_z, rng));
}

TurboSystem random_system(std::size_t n_x, std::size_t n_z, Rng& rng) {
  auto joint = random_joint(n_x, n_z, rng);
  auto enc = random_kernel(n_x, n_z, rng);
  auto dec = random_kernel(n_z, n_x, rng);
  return TurboSystem(std::move(joint), std::move(enc), std::move(dec));
}

TurboSystem random_system_sized(std::size_t min_size, std::size_t max_size, Rng& rng) {
  const std::size_t span = max_size - min_size + 1;
  const std::size_t n_x = min_size + rng.below(span);
  const std::size_t n_z = min_size + rng.below(span);
  return random_system(n_x, n_z, rng);
}

prob::StochasticKernel mix_kernels(const prob::StochasticKernel& a, const prob::StochasticKernel& b, double weight) {
  if (a.n_in() != b.n_in() || a.n_out() != b.n_out()) throw prob::DimensionMismatch("mix_kernels: shapes differ");
  std::vector<double> d(a.data().size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (1.0 - weight) * a.data()[i] + weight * b.data()[i];
  // Renormalize each row so rounding never pushes the mass off 1.
  for (std::size_t r = 0; r < a.n_in(); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < a.n_out(); ++c) total += d[r * a.n_out() + c];
    for (std::size_t c = 0; c < a.n_out(); ++c) d[r * a.n_out() + c] /= total;
  }
  return prob::StochasticKernel(a.n_in(), a.n_out(), std::move(d));
}

}  // namespace turbo::oracle
