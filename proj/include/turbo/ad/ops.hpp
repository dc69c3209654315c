#pragma once

// Differentiable kernels. Binary elementwise kernels broadcast with numpy
// rules: shapes are aligned on their trailing dimensions and an extent of 1
// stretches. Kinks (relu, abs, clamp) use subgradient 0 at the kink.

#include <vector>

#include "turbo/ad/tape.hpp"

namespace turbo::ad {

Shape broadcast_shapes(const Shape& a, const Shape& b);
/// Sums `grad` down to `shape` (the inverse of broadcasting).
Tensor reduce_to_shape(const Tensor& grad, const Shape& shape);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

/// [m, k] x [k, n] -> [m, n].
Var matmul(Var a, Var b);

/// Sum of every entry; scalar result.
Var sum(Var a);
/// Sum over one axis, which is removed from the shape.
Var sum(Var a, std::size_t axis);
Var mean(Var a);
Var mean(Var a, std::size_t axis);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// log(1 + exp(a)), evaluated stably.
Var softplus(Var a);
Var exp(Var a);
/// Throws DomainError if any entry is <= 0.
Var log(Var a);
Var square(Var a);
Var abs(Var a);
Var clamp(Var a, double lo, double hi);

Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Entries [begin, end) along `axis`.
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var broadcast(Var a, const Shape& shape);
Var reshape(Var a, const Shape& shape);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }

}  // namespace turbo::ad
