#include "turbo/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace turbo::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tape& same_tape(const Var& a, const Var& b) {
  if (!a.valid() || a.tape() != b.tape()) throw std::logic_error("operands live on different tapes");
  return *a.tape();
}

/// Shape with leading 1-extents removed.
Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

/// True when `small` broadcasts to `big` by repeating a trailing block.
bool is_trailing_block(const Shape& small, const Shape& big) {
  const Shape s = strip_leading_ones(small);
  if (s.size() > big.size()) return false;
  return std::equal(s.begin(), s.end(), big.end() - static_cast<std::ptrdiff_t>(s.size()));
}

/// For each flat index of `out`, the flat index of the broadcast input.
std::vector<std::size_t> broadcast_index(const Shape& out, const Shape& in) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t axis_in = in.size() - 1 - k;
    const std::size_t axis_out = rank - 1 - k;
    in_stride[axis_out] = in[axis_in] == 1 ? 0 : stride;
    stride *= in[axis_in];
  }
  const std::size_t n = numel(out);
  std::vector<std::size_t> idx(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = offset;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++counter[axis];
      offset += in_stride[axis];
      if (counter[axis] < out[axis]) break;
      offset -= in_stride[axis] * counter[axis];
      counter[axis] = 0;
    }
  }
  return idx;
}

template <typename F>
Tensor binary_map(const Tensor& a, const Tensor& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const Shape shape = broadcast_shapes(a.shape(), b.shape());
  Tensor out(shape);
  const std::size_t n = out.numel();
  if (shape == a.shape() && is_trailing_block(b.shape(), shape)) {
    const std::size_t nb = b.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i % nb]);
  } else if (shape == b.shape() && is_trailing_block(a.shape(), shape)) {
    const std::size_t na = a.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i % na], b[i]);
  } else {
    const auto ia = broadcast_index(shape, a.shape());
    const auto ib = broadcast_index(shape, b.shape());
    for (std::size_t i = 0; i < n; ++i) out[i] = f(a[ia[i]], b[ib[i]]);
  }
  return out;
}

/// Elementwise kernel y = f(x) with dy/dx = df(x, y).
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = f(x[i]);
  const NodeId ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, df](Tape& t, NodeId self, const Tensor& g) {
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(self);
    Tensor ga(xv.shape());
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] = g[i] * df(xv[i], yv[i]);
    t.accumulate(ia, std::move(ga));
  });
}

/// Splits a shape around `axis` into (outer, extent, inner) block counts.
struct AxisBlocks {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisBlocks blocks(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError(fmt::format("axis {} out of range for shape {}", axis, to_string(s)));
  AxisBlocks b;
  for (std::size_t i = 0; i < axis; ++i) b.outer *= s[i];
  b.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) b.inner *= s[i];
  return b;
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t ea = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t eb = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError(fmt::format("shapes {} and {} do not broadcast", to_string(a), to_string(b)));
    }
    out[rank - 1 - k] = std::max(ea, eb);
  }
  return out;
}

Tensor reduce_to_shape(const Tensor& grad, const Shape& shape) {
  if (grad.shape() == shape) return grad;
  Tensor out(shape, 0.0);
  const std::size_t n = grad.numel();
  if (out.numel() == 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += grad[i];
    out[0] = s;
  } else if (is_trailing_block(shape, grad.shape())) {
    const std::size_t m = out.numel();
    for (std::size_t i = 0; i < n; ++i) out[i % m] += grad[i];
  } else {
    if (broadcast_shapes(shape, grad.shape()) != grad.shape()) {
      throw ShapeError(fmt::format("cannot reduce {} to {}", to_string(grad.shape()), to_string(shape)));
    }
    const auto idx = broadcast_index(grad.shape(), shape);
    for (std::size_t i = 0; i < n; ++i) out[idx[i]] += grad[i];
  }
  return out;
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Tensor y = binary_map(a.value(), b.value(), [](double u, double v) { return u + v; });
  const NodeId ia = a.id(), ib = b.id();
  return t.record(std::move(y), {a, b}, [ia, ib](Tape& tp, NodeId, const Tensor& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, reduce_to_shape(g, tp.value(ia).shape()));
    if (tp.requires_grad(ib)) tp.accumulate(ib, reduce_to_shape(g, tp.value(ib).shape()));
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Tensor y = binary_map(a.value(), b.value(), [](double u, double v) { return u - v; });
  const NodeId ia = a.id(), ib = b.id();
  return t.record(std::move(y), {a, b}, [ia, ib](Tape& tp, NodeId, const Tensor& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, reduce_to_shape(g, tp.value(ia).shape()));
    if (tp.requires_grad(ib)) {
      Tensor gb = reduce_to_shape(g, tp.value(ib).shape());
      for (double& v : gb.data()) v = -v;
      tp.accumulate(ib, std::move(gb));
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Tensor y = binary_map(a.value(), b.value(), [](double u, double v) { return u * v; });
  const NodeId ia = a.id(), ib = b.id();
  return t.record(std::move(y), {a, b}, [ia, ib](Tape& tp, NodeId, const Tensor& g) {
    auto times = [](double u, double v) { return u * v; };
    if (tp.requires_grad(ia)) tp.accumulate(ia, reduce_to_shape(binary_map(g, tp.value(ib), times), tp.value(ia).shape()));
    if (tp.requires_grad(ib)) tp.accumulate(ib, reduce_to_shape(binary_map(g, tp.value(ia), times), tp.value(ib).shape()));
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError(fmt::format("matmul: incompatible shapes {} and {}", to_string(av.shape()), to_string(bv.shape())));
  }
  const auto m = static_cast<Eigen::Index>(av.dim(0));
  const auto k = static_cast<Eigen::Index>(av.dim(1));
  const auto n = static_cast<Eigen::Index>(bv.dim(1));
  Tensor y({av.dim(0), bv.dim(1)});
  Eigen::Map<RowMat>(y.data().data(), m, n).noalias() =
      Eigen::Map<const RowMat>(av.data().data(), m, k) * Eigen::Map<const RowMat>(bv.data().data(), k, n);
  const NodeId ia = a.id(), ib = b.id();
  return t.record(std::move(y), {a, b}, [ia, ib, m, k, n](Tape& tp, NodeId, const Tensor& g) {
    Eigen::Map<const RowMat> G(g.data().data(), m, n);
    if (tp.requires_grad(ia)) {
      Tensor ga({static_cast<std::size_t>(m), static_cast<std::size_t>(k)});
      Eigen::Map<RowMat>(ga.data().data(), m, k).noalias() =
          G * Eigen::Map<const RowMat>(tp.value(ib).data().data(), k, n).transpose();
      tp.accumulate(ia, std::move(ga));
    }
    if (tp.requires_grad(ib)) {
      Tensor gb({static_cast<std::size_t>(k), static_cast<std::size_t>(n)});
      Eigen::Map<RowMat>(gb.data().data(), k, n).noalias() =
          Eigen::Map<const RowMat>(tp.value(ia).data().data(), m, k).transpose() * G;
      tp.accumulate(ib, std::move(gb));
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const NodeId ia = a.id();
  return a.tape()->record(Tensor::scalar(s), {a}, [ia](Tape& tp, NodeId, const Tensor& g) {
    tp.accumulate(ia, Tensor(tp.value(ia).shape(), g[0]));
  });
}

Var sum(Var a, std::size_t axis) {
  const Shape& s = a.value().shape();
  const AxisBlocks b = blocks(s, axis);
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor y(out_shape, 0.0);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < b.outer; ++o)
    for (std::size_t e = 0; e < b.extent; ++e)
      for (std::size_t i = 0; i < b.inner; ++i) y[o * b.inner + i] += x[(o * b.extent + e) * b.inner + i];
  const NodeId ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, b](Tape& tp, NodeId, const Tensor& g) {
    Tensor ga(tp.value(ia).shape());
    for (std::size_t o = 0; o < b.outer; ++o)
      for (std::size_t e = 0; e < b.extent; ++e)
        for (std::size_t i = 0; i < b.inner; ++i) ga[(o * b.extent + e) * b.inner + i] = g[o * b.inner + i];
    tp.accumulate(ia, std::move(ga));
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().numel())); }

Var mean(Var a, std::size_t axis) {
  const double extent = static_cast<double>(blocks(a.value().shape(), axis).extent);
  return scale(sum(a, axis), 1.0 / extent);
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  // 1 - 2 / (exp(2a) + 1) keeps the vectorized exp on the hot path; the
  // absolute error stays at rounding level and the limits are exact.
  const Tensor& x = a.value();
  Tensor y(x.shape());
  const auto n = static_cast<Eigen::Index>(x.numel());
  Eigen::Map<const Eigen::ArrayXd> xv(x.data().data(), n);
  Eigen::Map<Eigen::ArrayXd>(y.data().data(), n) = 1.0 - 2.0 / ((2.0 * xv).exp() + 1.0);
  const NodeId ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, n](Tape& t, NodeId self, const Tensor& g) {
    Eigen::Map<const Eigen::ArrayXd> yv(t.value(self).data().data(), n);
    Eigen::Map<const Eigen::ArrayXd> gv(g.data().data(), n);
    Tensor ga(t.value(ia).shape());
    Eigen::Map<Eigen::ArrayXd>(ga.data().data(), n) = gv * (1.0 - yv * yv);
    t.accumulate(ia, std::move(ga));
  });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var exp(Var a) {
  for (double v : a.value().data()) {
    if (!std::isfinite(std::exp(v))) throw DomainError(fmt::format("exp: overflow at input {}", v));
  }
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError(fmt::format("log: non-positive input {}", v));
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must be <= hi");
  return unary(
      a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape* t = parts.front().tape();
  const Shape& first = parts.front().value().shape();
  Shape out_shape = first;
  out_shape.at(axis) = 0;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    if (p.tape() != t) throw std::logic_error("concat: operands live on different tapes");
    const Shape& s = p.value().shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) throw ShapeError("concat: shapes differ off the concat axis");
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisBlocks ob = blocks(out_shape, axis);
  Tensor y(out_shape);
  std::size_t start = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& x = parts[p].value();
    const std::size_t chunk = extents[p] * ob.inner;
    for (std::size_t o = 0; o < ob.outer; ++o)
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  y.data().begin() + static_cast<std::ptrdiff_t>(o * ob.extent * ob.inner + start * ob.inner));
    start += extents[p];
  }
  std::vector<NodeId> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return t->record(std::move(y), parts, [ids, extents, ob](Tape& tp, NodeId, const Tensor& g) {
    std::size_t start = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const std::size_t chunk = extents[p] * ob.inner;
      if (tp.requires_grad(ids[p])) {
        Tensor gp(tp.value(ids[p]).shape());
        for (std::size_t o = 0; o < ob.outer; ++o)
          std::copy_n(g.data().begin() + static_cast<std::ptrdiff_t>(o * ob.extent * ob.inner + start * ob.inner),
                      chunk, gp.data().begin() + static_cast<std::ptrdiff_t>(o * chunk));
        tp.accumulate(ids[p], std::move(gp));
      }
      start += extents[p];
    }
  });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.value().shape();
  const AxisBlocks b = blocks(s, axis);
  if (begin >= end || end > b.extent) {
    throw ShapeError(fmt::format("slice: range [{}, {}) invalid for extent {}", begin, end, b.extent));
  }
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * b.inner;
  Tensor y(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < b.outer; ++o)
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>((o * b.extent + begin) * b.inner), chunk,
                y.data().begin() + static_cast<std::ptrdiff_t>(o * chunk));
  const NodeId ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, b, begin, chunk](Tape& tp, NodeId, const Tensor& g) {
    Tensor ga(tp.value(ia).shape(), 0.0);
    for (std::size_t o = 0; o < b.outer; ++o)
      std::copy_n(g.data().begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  ga.data().begin() + static_cast<std::ptrdiff_t>((o * b.extent + begin) * b.inner));
    tp.accumulate(ia, std::move(ga));
  });
}

Var broadcast(Var a, const Shape& shape) {
  const Tensor& x = a.value();
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw ShapeError(fmt::format("broadcast: {} does not broadcast to {}", to_string(x.shape()), to_string(shape)));
  }
  Tensor y(shape);
  const auto idx = broadcast_index(shape, x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = x[idx[i]];
  const NodeId ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& tp, NodeId, const Tensor& g) {
    tp.accumulate(ia, reduce_to_shape(g, tp.value(ia).shape()));
  });
}

Var reshape(Var a, const Shape& shape) {
  Tensor y = a.value().reshaped(shape);
  const NodeId ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& tp, NodeId, const Tensor& g) {
    tp.accumulate(ia, g.reshaped(tp.value(ia).shape()));
  });
}

}  // namespace turbo::ad
