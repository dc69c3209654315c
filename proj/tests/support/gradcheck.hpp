#pragma once

// Central finite-difference gradient checks for tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "turbo/ad/ops.hpp"

namespace turbo::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t input = 0;
  std::size_t entry = 0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, floor).
inline double rel_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Compares backward() against central differences with step h on every
/// entry of every input.
inline GradCheck gradcheck(const ScalarFn& f, std::vector<ad::Tensor> inputs, double h = 1e-5) {
  std::vector<ad::Tensor> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.parameter(t));
    const auto grads = tape.backward(f(tape, vars));
    for (const auto& v : vars) analytic.push_back(grads.at(v));
  }
  auto eval = [&](const std::vector<ad::Tensor>& in) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : in) vars.push_back(tape.constant(t));
    return f(tape, vars).value().item();
  };
  GradCheck r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].numel(); ++k) {
      const double x0 = inputs[i][k];
      inputs[i][k] = x0 + h;
      const double up = eval(inputs);
      inputs[i][k] = x0 - h;
      const double down = eval(inputs);
      inputs[i][k] = x0;
      const double err = rel_error(analytic[i][k], (up - down) / (2.0 * h));
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.input = i;
        r.entry = k;
      }
    }
  }
  return r;
}

/// Reduces a tensor-valued expression to a scalar with fixed random-looking
/// weights so every output entry reaches the gradient.
inline ad::Var weighted_sum(ad::Tape& tape, ad::Var y) {
  ad::Tensor w(y.shape());
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = 0.3 + std::sin(1.7 * static_cast<double>(i) + 0.4);
  return ad::sum(ad::mul(y, tape.constant(w)));
}

/// Deterministic tensor with entries in [lo, hi].
inline ad::Tensor filled(ad::Shape shape, double lo, double hi, unsigned salt = 0) {
  ad::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double u = 0.5 + 0.5 * std::sin(2.3 * static_cast<double>(i) + 0.77 * salt + 0.1);
    t[i] = lo + (hi - lo) * u;
  }
  return t;
}

}  // namespace turbo::testing
