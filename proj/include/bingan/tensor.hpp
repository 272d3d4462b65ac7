#ifndef BINGAN_TENSOR_HPP_
#define BINGAN_TENSOR_HPP_

// Reverse-mode automatic differentiation over dense row-major arrays.
//
// Every op evaluates eagerly and, when gradients are enabled and an input
// requires them, records itself on the implicit tape (a creation-ordered DAG
// of nodes). Backward rules are themselves written in terms of recorded ops,
// so running backward with create_graph produces gradients that are again
// differentiable. That is what carries the double backpropagation needed by
// the WGAN-GP gradient penalty. Ops whose backward rule captures raw buffers
// (custom hooks such as the binary-neuron estimators) are flagged as
// first-order only and rejected when a second-order pass reaches them.
//
// Reductions and kernels accumulate in a fixed sequential order; worker
// threads only split independent output elements, so results are
// bit-identical across runs and thread counts on one platform.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bingan/util.hpp"

namespace bingan {

template <typename T>
class Tensor;

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> values;
  const char* op = "leaf";
  std::uint64_t seq = 0;
  bool requires_grad = false;
  bool is_leaf = true;
  bool second_order_ok = true;
  std::vector<Tensor<T>> parents;
  // Maps the upstream gradient to one gradient per parent, in parent order.
  std::function<std::vector<Tensor<T>>(TensorNode<T>*, const Tensor<T>&)> backward;
  std::shared_ptr<TensorNode<T>> grad;  // leaf accumulator
};

namespace detail {
inline std::atomic<std::uint64_t> node_seq{1};
inline thread_local bool grad_enabled = true;
}  // namespace detail

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = prev; }
};

inline bool grad_mode_enabled() { return detail::grad_enabled; }

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<T>> n) : n_(std::move(n)) {}

  static Tensor from(Shape shape, std::vector<T> values) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
      throw TensorError("tensor: " + shape_str(shape) + " does not hold " +
                        std::to_string(values.size()) + " values");
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->seq = detail::node_seq.fetch_add(1);
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape) {
    auto count = static_cast<std::size_t>(shape_numel(shape));
    return from(std::move(shape), std::vector<T>(count, T(0)));
  }

  static Tensor full(Shape shape, T value) {
    auto count = static_cast<std::size_t>(shape_numel(shape));
    return from(std::move(shape), std::vector<T>(count, value));
  }

  static Tensor scalar(T value) { return from({1}, {value}); }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  std::int64_t numel() const { return shape_numel(n_->shape); }
  int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }

  const std::vector<T>& vec() const { return n_->values; }
  const T* data() const { return n_->values.data(); }
  T* mutable_data() { return n_->values.data(); }
  T at(std::int64_t i) const { return n_->values[static_cast<std::size_t>(i)]; }

  T item() const {
    if (numel() != 1) fail_op(n_->op, "item() on non-scalar " + shape_str(n_->shape));
    return n_->values[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  bool is_leaf() const { return n_->is_leaf; }
  const char* op() const { return n_->op; }

  Tensor& set_requires_grad(bool flag) {
    if (!n_->is_leaf) throw TensorError("requires_grad can only be toggled on leaf tensors");
    n_->requires_grad = flag;
    return *this;
  }

  Tensor grad() const { return Tensor(n_->grad); }
  bool has_grad() const { return n_->grad != nullptr; }
  void zero_grad() { n_->grad.reset(); }

  // Copies values into a fresh leaf outside any recorded graph.
  Tensor detach() const {
    Tensor t = from(n_->shape, n_->values);
    return t;
  }

  Tensor clone_leaf(bool needs_grad) const {
    Tensor t = detach();
    t.set_requires_grad(needs_grad);
    return t;
  }

  TensorNode<T>* node() const { return n_.get(); }
  const std::shared_ptr<TensorNode<T>>& handle() const { return n_; }

  bool all_finite() const {
    for (T v : n_->values)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  std::shared_ptr<TensorNode<T>> n_;
};

namespace detail {

template <typename T>
Tensor<T> make_op(const char* op, Shape shape, std::vector<T> values,
                  std::vector<Tensor<T>> parents,
                  std::function<std::vector<Tensor<T>>(TensorNode<T>*, const Tensor<T>&)> backward,
                  bool second_order_ok = true) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->op = op;
  n->seq = node_seq.fetch_add(1);
  n->is_leaf = false;
  bool wants = false;
  if (grad_enabled)
    for (const auto& p : parents)
      if (p.requires_grad()) wants = true;
  n->requires_grad = wants;
  if (wants) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
    n->second_order_ok = second_order_ok;
  }
  return Tensor<T>(std::move(n));
}

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!same_shape(a.shape(), b.shape()))
    fail_op(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural primitives
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("add", a, b);
  std::vector<T> out(a.vec());
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  return detail::make_op<T>(
      "add", a.shape(), std::move(out), {a, b},
      [](TensorNode<T>*, const Tensor<T>& g) { return std::vector<Tensor<T>>{g, g}; });
}

// a*x + b with scalar coefficients.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, double a, double b) {
  std::vector<T> out(x.vec());
  for (auto& v : out) v = static_cast<T>(a * static_cast<double>(v) + b);
  return detail::make_op<T>(
      "affine", x.shape(), std::move(out), {x},
      [a](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{affine(g, a, 0.0)};
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, affine(b, -1.0, 0.0));
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("mul", a, b);
  std::vector<T> out(a.vec());
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  return detail::make_op<T>(
      "mul", a.shape(), std::move(out), {a, b},
      [](TensorNode<T>* self, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{mul(g, self->parents[1]), mul(g, self->parents[0])};
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.vec());
  for (auto& v : out) {
    double d = static_cast<double>(v);
    double s = d >= 0.0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
    v = static_cast<T>(s);
  }
  return detail::make_op<T>(
      "sigmoid", x.shape(), std::move(out), {x},
      [](TensorNode<T>* self, const Tensor<T>& g) {
        // sigma' re-expressed through the input so the rule stays
        // differentiable for the second-order pass.
        Tensor<T> s = sigmoid(self->parents[0]);
        Tensor<T> ds = mul(s, affine(s, -1.0, 1.0));
        return std::vector<Tensor<T>>{mul(g, ds)};
      });
}

// Natural log; errors on a non-positive input (log domain contract).
template <typename T>
Tensor<T> log_e(const Tensor<T>& x) {
  std::vector<T> out(x.vec());
  for (auto& v : out) {
    if (!(static_cast<double>(v) > 0.0))
      fail_op("log", "domain error, input " + std::to_string(static_cast<double>(v)));
    v = static_cast<T>(std::log(static_cast<double>(v)));
  }
  return detail::make_op<T>(
      "log", x.shape(), std::move(out), {x},
      [](TensorNode<T>* self, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{mul(g, pow_scalar(self->parents[0], -1.0))};
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.vec());
  for (auto& v : out)
    if (v < T(0)) v = T(0);
  return detail::make_op<T>(
      "relu", x.shape(), std::move(out), {x},
      [](TensorNode<T>* self, const Tensor<T>& g) {
        const auto& xv = self->parents[0].vec();
        std::vector<T> mask(xv.size());
        for (std::size_t i = 0; i < xv.size(); ++i) mask[i] = xv[i] > T(0) ? T(1) : T(0);
        return std::vector<Tensor<T>>{mul(g, Tensor<T>::from(self->parents[0].shape(), std::move(mask)))};
      });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope) {
  std::vector<T> out(x.vec());
  for (auto& v : out)
    if (v < T(0)) v = static_cast<T>(slope * static_cast<double>(v));
  return detail::make_op<T>(
      "leaky_relu", x.shape(), std::move(out), {x},
      [slope](TensorNode<T>* self, const Tensor<T>& g) {
        const auto& xv = self->parents[0].vec();
        std::vector<T> mask(xv.size());
        for (std::size_t i = 0; i < xv.size(); ++i)
          mask[i] = xv[i] > T(0) ? T(1) : static_cast<T>(slope);
        return std::vector<Tensor<T>>{mul(g, Tensor<T>::from(self->parents[0].shape(), std::move(mask)))};
      });
}

// x^p with constant exponent. Convention: 0^p = 0 for p < 0, which makes the
// derivative chain bottom out at zero (the subgradient choice used for the
// per-sample L2 norm at the origin).
template <typename T>
Tensor<T> pow_scalar(const Tensor<T>& x, double p) {
  bool integral = p == std::floor(p);
  std::vector<T> out(x.vec());
  for (auto& v : out) {
    double d = static_cast<double>(v);
    if (d == 0.0) {
      v = static_cast<T>(p > 0.0 ? 0.0 : (p == 0.0 ? 1.0 : 0.0));
      continue;
    }
    if (d < 0.0 && !integral)
      fail_op("pow", "negative base " + std::to_string(d) + " with non-integer exponent");
    v = static_cast<T>(std::pow(d, p));
  }
  return detail::make_op<T>(
      "pow", x.shape(), std::move(out), {x},
      [p](TensorNode<T>* self, const Tensor<T>& g) {
        Tensor<T> d = affine(pow_scalar(self->parents[0], p - 1.0), p, 0.0);
        return std::vector<Tensor<T>>{mul(g, d)};
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    fail_op("reshape", shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  Shape old = x.shape();
  return detail::make_op<T>(
      "reshape", std::move(shape), x.vec(), {x},
      [old](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{reshape(g, old)};
      });
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, int axis) {
  if (a.ndim() != b.ndim()) fail_op("concat", "rank mismatch");
  for (int i = 0; i < a.ndim(); ++i)
    if (i != axis && a.dim(i) != b.dim(i))
      fail_op("concat", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] += b.dim(axis);
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  for (int i = axis + 1; i < a.ndim(); ++i) inner *= a.dim(i);
  std::int64_t wa = a.dim(axis) * inner, wb = b.dim(axis) * inner;
  std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * (wa + wb), a.data() + o * wa, sizeof(T) * static_cast<std::size_t>(wa));
    std::memcpy(out.data() + o * (wa + wb) + wa, b.data() + o * wb, sizeof(T) * static_cast<std::size_t>(wb));
  }
  int alen = a.dim(axis);
  return detail::make_op<T>(
      "concat", std::move(out_shape), std::move(out), {a, b},
      [axis, alen](TensorNode<T>* self, const Tensor<T>& g) {
        int blen = self->shape[static_cast<std::size_t>(axis)] - alen;
        return std::vector<Tensor<T>>{slice(g, axis, 0, alen), slice(g, axis, alen, blen)};
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int start, int len) {
  if (axis < 0 || axis >= x.ndim() || start < 0 || len <= 0 || start + len > x.dim(axis))
    fail_op("slice", "window [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") out of range for " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  std::int64_t wx = x.dim(axis) * inner, wo = len * inner;
  std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)));
  for (std::int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * wo, x.data() + o * wx + start * inner,
                sizeof(T) * static_cast<std::size_t>(wo));
  int total = x.dim(axis);
  return detail::make_op<T>(
      "slice", std::move(out_shape), std::move(out), {x},
      [axis, start, len, total](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{pad_axis(g, axis, start, total - start - len)};
      });
}

// Zero-pads along one axis; the adjoint of slice.
template <typename T>
Tensor<T> pad_axis(const Tensor<T>& x, int axis, int before, int after) {
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] += before + after;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  std::int64_t wx = x.dim(axis) * inner;
  std::int64_t wo = out_shape[static_cast<std::size_t>(axis)] * inner;
  std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)), T(0));
  for (std::int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * wo + before * inner, x.data() + o * wx,
                sizeof(T) * static_cast<std::size_t>(wx));
  int len = x.dim(axis);
  return detail::make_op<T>(
      "pad_axis", std::move(out_shape), std::move(out), {x},
      [axis, before, len](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{slice(g, axis, before, len)};
      });
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts (mutually adjoint pairs)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  double acc = 0.0;
  for (T v : x.vec()) acc += static_cast<double>(v);
  Shape old = x.shape();
  return detail::make_op<T>(
      "sum", {1}, {static_cast<T>(acc)}, {x},
      [old](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{expand_scalar(g, old)};
      });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return affine(sum_all(x), 1.0 / static_cast<double>(x.numel()), 0.0);
}

template <typename T>
Tensor<T> expand_scalar(const Tensor<T>& s, Shape shape) {
  if (s.numel() != 1) fail_op("expand_scalar", "source is not a scalar");
  auto count = static_cast<std::size_t>(shape_numel(shape));
  return detail::make_op<T>(
      "expand_scalar", std::move(shape), std::vector<T>(count, s.at(0)), {s},
      [](TensorNode<T>*, const Tensor<T>& g) { return std::vector<Tensor<T>>{sum_all(g)}; });
}

// Per-sample sum over every non-batch dim: [N, ...] -> [N].
template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  if (x.ndim() < 2) fail_op("sum_rows", "needs a batch dim, got " + shape_str(x.shape()));
  int n = x.dim(0);
  std::int64_t row = x.numel() / n;
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const T* p = x.data() + i * row;
    for (std::int64_t j = 0; j < row; ++j) acc += static_cast<double>(p[j]);
    out[static_cast<std::size_t>(i)] = static_cast<T>(acc);
  }
  Shape old = x.shape();
  return detail::make_op<T>(
      "sum_rows", {n}, std::move(out), {x},
      [old](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{broadcast_rows(g, old)};
      });
}

template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& v, Shape shape) {
  if (v.ndim() != 1 || shape.empty() || v.dim(0) != shape[0])
    fail_op("broadcast_rows", shape_str(v.shape()) + " into " + shape_str(shape));
  int n = shape[0];
  std::int64_t row = shape_numel(shape) / n;
  std::vector<T> out(static_cast<std::size_t>(shape_numel(shape)));
  for (int i = 0; i < n; ++i)
    std::fill_n(out.begin() + i * row, row, v.at(i));
  return detail::make_op<T>(
      "broadcast_rows", std::move(shape), std::move(out), {v},
      [](TensorNode<T>*, const Tensor<T>& g) { return std::vector<Tensor<T>>{sum_rows(g)}; });
}

// Sum over the batch dim: [N, D...] -> [D...]; adjoint of broadcast_feature.
template <typename T>
Tensor<T> sum_to_feature(const Tensor<T>& x) {
  if (x.ndim() < 2) fail_op("sum_to_feature", "needs a batch dim");
  int n = x.dim(0);
  std::int64_t row = x.numel() / n;
  Shape out_shape(x.shape().begin() + 1, x.shape().end());
  std::vector<T> out(static_cast<std::size_t>(row), T(0));
  for (int i = 0; i < n; ++i) {
    const T* p = x.data() + i * row;
    for (std::int64_t j = 0; j < row; ++j) out[static_cast<std::size_t>(j)] += p[j];
  }
  return detail::make_op<T>(
      "sum_to_feature", std::move(out_shape), std::move(out), {x},
      [n](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{broadcast_feature(g, n)};
      });
}

template <typename T>
Tensor<T> broadcast_feature(const Tensor<T>& v, int batch) {
  Shape out_shape;
  out_shape.push_back(batch);
  for (int d : v.shape()) out_shape.push_back(d);
  std::int64_t row = v.numel();
  std::vector<T> out(static_cast<std::size_t>(batch * row));
  for (int i = 0; i < batch; ++i)
    std::memcpy(out.data() + i * row, v.data(), sizeof(T) * static_cast<std::size_t>(row));
  return detail::make_op<T>(
      "broadcast_feature", std::move(out_shape), std::move(out), {v},
      [](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{sum_to_feature(g)};
      });
}

// Per-channel sum of an NCHW tensor -> [C]; adjoint of broadcast_channel.
template <typename T>
Tensor<T> sum_to_channel(const Tensor<T>& x) {
  if (x.ndim() != 4) fail_op("sum_to_channel", "expects NCHW, got " + shape_str(x.shape()));
  int n = x.dim(0), c = x.dim(1);
  std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  std::vector<T> out(static_cast<std::size_t>(c), T(0));
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const T* p = x.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
      double acc = static_cast<double>(out[static_cast<std::size_t>(ch)]);
      for (std::int64_t j = 0; j < plane; ++j) acc += static_cast<double>(p[j]);
      out[static_cast<std::size_t>(ch)] = static_cast<T>(acc);
    }
  Shape old = x.shape();
  return detail::make_op<T>(
      "sum_to_channel", {c}, std::move(out), {x},
      [old](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{broadcast_channel(g, old)};
      });
}

template <typename T>
Tensor<T> broadcast_channel(const Tensor<T>& v, Shape shape) {
  if (v.ndim() != 1 || shape.size() != 4 || v.dim(0) != shape[1])
    fail_op("broadcast_channel", shape_str(v.shape()) + " into " + shape_str(shape));
  int n = shape[0], c = shape[1];
  std::int64_t plane = static_cast<std::int64_t>(shape[2]) * shape[3];
  std::vector<T> out(static_cast<std::size_t>(shape_numel(shape)));
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      std::fill_n(out.begin() + (static_cast<std::int64_t>(i) * c + ch) * plane, plane, v.at(ch));
  return detail::make_op<T>(
      "broadcast_channel", std::move(shape), std::move(out), {v},
      [](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{sum_to_channel(g)};
      });
}

// Adds a per-feature bias: [N, D...] + [D...].
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.ndim() < 2 || b.numel() * x.dim(0) != x.numel())
    fail_op("add_bias", shape_str(x.shape()) + " + " + shape_str(b.shape()));
  int n = x.dim(0);
  std::int64_t row = b.numel();
  std::vector<T> out(x.vec());
  for (int i = 0; i < n; ++i) {
    T* p = out.data() + i * row;
    const T* pb = b.data();
    for (std::int64_t j = 0; j < row; ++j) p[j] += pb[j];
  }
  return detail::make_op<T>(
      "add_bias", x.shape(), std::move(out), {x, b},
      [](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{g, sum_to_feature(g)};
      });
}

// Adds a per-channel bias to an NCHW tensor.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.ndim() != 4 || b.ndim() != 1 || b.dim(0) != x.dim(1))
    fail_op("add_channel_bias", shape_str(x.shape()) + " + " + shape_str(b.shape()));
  int n = x.dim(0), c = x.dim(1);
  std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  std::vector<T> out(x.vec());
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      T* p = out.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
      T bv = b.at(ch);
      for (std::int64_t j = 0; j < plane; ++j) p[j] += bv;
    }
  return detail::make_op<T>(
      "add_channel_bias", x.shape(), std::move(out), {x, b},
      [](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{g, sum_to_channel(g)};
      });
}

// ---------------------------------------------------------------------------
// Dense algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.ndim() != 2) fail_op("transpose", "expects a matrix, got " + shape_str(x.shape()));
  int r = x.dim(0), c = x.dim(1);
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const T* px = x.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(j) * r + i] = px[static_cast<std::size_t>(i) * c + j];
  return detail::make_op<T>(
      "transpose", {c, r}, std::move(out), {x},
      [](TensorNode<T>*, const Tensor<T>& g) { return std::vector<Tensor<T>>{transpose(g)}; });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    fail_op("matmul", "inner dims of " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                          " do not match");
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<T> out(static_cast<std::size_t>(n) * m, T(0));
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  parallel_for(n, std::max<std::int64_t>(1, (1 << 18) / std::max(1, k * m)),
               [&](std::int64_t lo, std::int64_t hi) {
                 for (std::int64_t i = lo; i < hi; ++i) {
                   T* row = po + i * m;
                   const T* arow = pa + i * k;
                   for (int kk = 0; kk < k; ++kk) {
                     T av = arow[kk];
                     const T* brow = pb + static_cast<std::int64_t>(kk) * m;
                     for (int j = 0; j < m; ++j) row[j] += av * brow[j];
                   }
                 }
               });
  return detail::make_op<T>(
      "matmul", {n, m}, std::move(out), {a, b},
      [](TensorNode<T>* self, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{matmul(g, transpose(self->parents[1])),
                                      matmul(transpose(self->parents[0]), g)};
      });
}

// ---------------------------------------------------------------------------
// Convolution family. conv2d, its data gradient and its weight gradient form
// a trio that is closed under differentiation, which is what makes the
// gradient-penalty double backward work through conv layers.
// ---------------------------------------------------------------------------

enum class PadMode { kValid, kSame };

struct ConvGeom {
  int stride_h = 1, stride_w = 1;
  int pad_t = 0, pad_l = 0;
  int in_h = 0, in_w = 0;    // data-side spatial size
  int out_h = 0, out_w = 0;  // output-side spatial size
  int k_h = 0, k_w = 0;
};

inline ConvGeom conv_geometry(int in_h, int in_w, int k_h, int k_w, int stride_h, int stride_w,
                              PadMode pad) {
  ConvGeom geo;
  geo.stride_h = stride_h;
  geo.stride_w = stride_w;
  geo.in_h = in_h;
  geo.in_w = in_w;
  geo.k_h = k_h;
  geo.k_w = k_w;
  if (pad == PadMode::kValid) {
    if (in_h < k_h || in_w < k_w)
      throw TensorError("conv2d: input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                        " smaller than kernel " + std::to_string(k_h) + "x" + std::to_string(k_w));
    geo.out_h = (in_h - k_h) / stride_h + 1;
    geo.out_w = (in_w - k_w) / stride_w + 1;
  } else {
    geo.out_h = (in_h + stride_h - 1) / stride_h;
    geo.out_w = (in_w + stride_w - 1) / stride_w;
    int pad_h = std::max(0, (geo.out_h - 1) * stride_h + k_h - in_h);
    int pad_w = std::max(0, (geo.out_w - 1) * stride_w + k_w - in_w);
    geo.pad_t = pad_h / 2;
    geo.pad_l = pad_w / 2;
  }
  return geo;
}

template <typename T>
Tensor<T> conv2d_data_grad(const Tensor<T>& g, const Tensor<T>& w, const ConvGeom& geo);
template <typename T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& x, const Tensor<T>& g, const ConvGeom& geo);

// Cross-correlation of NCHW data with [Cout, Cin, kh, kw] kernels.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvGeom& geo) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.dim(1) != w.dim(1))
    fail_op("conv2d", shape_str(x.shape()) + " with kernels " + shape_str(w.shape()));
  if (x.dim(2) != geo.in_h || x.dim(3) != geo.in_w || w.dim(2) != geo.k_h || w.dim(3) != geo.k_w)
    fail_op("conv2d", "geometry mismatch for " + shape_str(x.shape()));
  const int n = x.dim(0), ci = x.dim(1), co = w.dim(0);
  const int ho = geo.out_h, wo = geo.out_w;
  std::vector<T> out(static_cast<std::size_t>(n) * co * ho * wo, T(0));
  const T* px = x.data();
  const T* pw = w.data();
  T* po = out.data();
  parallel_for(n, 1, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t b = lo; b < hi; ++b)
      for (int oc = 0; oc < co; ++oc)
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            double acc = 0.0;
            for (int ic = 0; ic < ci; ++ic)
              for (int ky = 0; ky < geo.k_h; ++ky) {
                int iy = oy * geo.stride_h + ky - geo.pad_t;
                if (iy < 0 || iy >= geo.in_h) continue;
                for (int kx = 0; kx < geo.k_w; ++kx) {
                  int ix = ox * geo.stride_w + kx - geo.pad_l;
                  if (ix < 0 || ix >= geo.in_w) continue;
                  acc += static_cast<double>(
                             px[((b * ci + ic) * geo.in_h + iy) * geo.in_w + ix]) *
                         static_cast<double>(
                             pw[((static_cast<std::int64_t>(oc) * ci + ic) * geo.k_h + ky) * geo.k_w + kx]);
                }
              }
            po[((b * co + oc) * ho + oy) * wo + ox] = static_cast<T>(acc);
          }
  });
  return detail::make_op<T>(
      "conv2d", {n, co, ho, wo}, std::move(out), {x, w},
      [geo](TensorNode<T>* self, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{conv2d_data_grad(g, self->parents[1], geo),
                                      conv2d_weight_grad(self->parents[0], g, geo)};
      });
}

// Adjoint of conv2d in the data slot: [N, Cout, Ho, Wo] x kernels -> [N, Cin, H, W].
template <typename T>
Tensor<T> conv2d_data_grad(const Tensor<T>& g, const Tensor<T>& w, const ConvGeom& geo) {
  if (g.ndim() != 4 || w.ndim() != 4 || g.dim(1) != w.dim(0))
    fail_op("conv2d_data_grad", shape_str(g.shape()) + " with kernels " + shape_str(w.shape()));
  if (g.dim(2) != geo.out_h || g.dim(3) != geo.out_w)
    fail_op("conv2d_data_grad", "geometry mismatch for " + shape_str(g.shape()));
  const int n = g.dim(0), co = g.dim(1), ci = w.dim(1);
  std::vector<T> out(static_cast<std::size_t>(n) * ci * geo.in_h * geo.in_w, T(0));
  const T* pg = g.data();
  const T* pw = w.data();
  T* po = out.data();
  parallel_for(n, 1, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t b = lo; b < hi; ++b)
      for (int ic = 0; ic < ci; ++ic)
        for (int iy = 0; iy < geo.in_h; ++iy)
          for (int ix = 0; ix < geo.in_w; ++ix) {
            double acc = 0.0;
            for (int oc = 0; oc < co; ++oc)
              for (int ky = 0; ky < geo.k_h; ++ky) {
                int ny = iy + geo.pad_t - ky;
                if (ny < 0 || ny % geo.stride_h) continue;
                int oy = ny / geo.stride_h;
                if (oy >= geo.out_h) continue;
                for (int kx = 0; kx < geo.k_w; ++kx) {
                  int nx = ix + geo.pad_l - kx;
                  if (nx < 0 || nx % geo.stride_w) continue;
                  int ox = nx / geo.stride_w;
                  if (ox >= geo.out_w) continue;
                  acc += static_cast<double>(pg[((b * co + oc) * geo.out_h + oy) * geo.out_w + ox]) *
                         static_cast<double>(
                             pw[((static_cast<std::int64_t>(oc) * ci + ic) * geo.k_h + ky) * geo.k_w + kx]);
                }
              }
            po[((b * ci + ic) * geo.in_h + iy) * geo.in_w + ix] = static_cast<T>(acc);
          }
  });
  return detail::make_op<T>(
      "conv2d_data_grad", {n, ci, geo.in_h, geo.in_w}, std::move(out), {g, w},
      [geo](TensorNode<T>* self, const Tensor<T>& u) {
        return std::vector<Tensor<T>>{conv2d(u, self->parents[1], geo),
                                      conv2d_weight_grad(u, self->parents[0], geo)};
      });
}

// Adjoint of conv2d in the kernel slot: data x [N, Cout, Ho, Wo] -> kernels.
template <typename T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& x, const Tensor<T>& g, const ConvGeom& geo) {
  if (x.ndim() != 4 || g.ndim() != 4 || x.dim(0) != g.dim(0))
    fail_op("conv2d_weight_grad", shape_str(x.shape()) + " with " + shape_str(g.shape()));
  const int n = x.dim(0), ci = x.dim(1), co = g.dim(1);
  std::vector<T> out(static_cast<std::size_t>(co) * ci * geo.k_h * geo.k_w, T(0));
  const T* px = x.data();
  const T* pg = g.data();
  T* po = out.data();
  parallel_for(co, 1, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t oc = lo; oc < hi; ++oc)
      for (int ic = 0; ic < ci; ++ic)
        for (int ky = 0; ky < geo.k_h; ++ky)
          for (int kx = 0; kx < geo.k_w; ++kx) {
            double acc = 0.0;
            for (int b = 0; b < n; ++b)
              for (int oy = 0; oy < geo.out_h; ++oy) {
                int iy = oy * geo.stride_h + ky - geo.pad_t;
                if (iy < 0 || iy >= geo.in_h) continue;
                for (int ox = 0; ox < geo.out_w; ++ox) {
                  int ix = ox * geo.stride_w + kx - geo.pad_l;
                  if (ix < 0 || ix >= geo.in_w) continue;
                  acc += static_cast<double>(
                             px[((static_cast<std::int64_t>(b) * ci + ic) * geo.in_h + iy) * geo.in_w + ix]) *
                         static_cast<double>(
                             pg[((static_cast<std::int64_t>(b) * co + oc) * geo.out_h + oy) * geo.out_w + ox]);
                }
              }
            po[((oc * ci + ic) * geo.k_h + ky) * geo.k_w + kx] = static_cast<T>(acc);
          }
  });
  return detail::make_op<T>(
      "conv2d_weight_grad", {co, ci, geo.k_h, geo.k_w}, std::move(out), {x, g},
      [geo](TensorNode<T>* self, const Tensor<T>& u) {
        return std::vector<Tensor<T>>{conv2d_data_grad(self->parents[1], u, geo),
                                      conv2d(self->parents[0], u, geo)};
      });
}

// Swaps dims 0 and 1 of a 4-D kernel tensor.
template <typename T>
Tensor<T> swap01(const Tensor<T>& w) {
  if (w.ndim() != 4) fail_op("swap01", "expects 4-D, got " + shape_str(w.shape()));
  int a = w.dim(0), b = w.dim(1);
  std::int64_t plane = static_cast<std::int64_t>(w.dim(2)) * w.dim(3);
  std::vector<T> out(static_cast<std::size_t>(w.numel()));
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < b; ++j)
      std::memcpy(out.data() + (static_cast<std::int64_t>(j) * a + i) * plane,
                  w.data() + (static_cast<std::int64_t>(i) * b + j) * plane,
                  sizeof(T) * static_cast<std::size_t>(plane));
  return detail::make_op<T>(
      "swap01", {b, a, w.dim(2), w.dim(3)}, std::move(out), {w},
      [](TensorNode<T>*, const Tensor<T>& g) { return std::vector<Tensor<T>>{swap01(g)}; });
}

// Transposed convolution (valid): [N, Cin, H, W] with kernels
// [Cout, Cin, kh, kw] -> [N, Cout, (H-1)*s + kh, (W-1)*s + kw].
template <typename T>
Tensor<T> transconv2d(const Tensor<T>& x, const Tensor<T>& w, int stride_h, int stride_w) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.dim(1) != w.dim(1))
    fail_op("transconv2d", shape_str(x.shape()) + " with kernels " + shape_str(w.shape()));
  ConvGeom geo;
  geo.stride_h = stride_h;
  geo.stride_w = stride_w;
  geo.k_h = w.dim(2);
  geo.k_w = w.dim(3);
  geo.out_h = x.dim(2);
  geo.out_w = x.dim(3);
  geo.in_h = (x.dim(2) - 1) * stride_h + geo.k_h;
  geo.in_w = (x.dim(3) - 1) * stride_w + geo.k_w;
  return conv2d_data_grad(x, swap01(w), geo);
}

// ---------------------------------------------------------------------------
// Max pooling. The upstream gradient is routed to the argmax position; ties
// go to the first index in row-major order.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> pool_scatter(const Tensor<T>& g, std::shared_ptr<const std::vector<std::int64_t>> idx,
                       Shape in_shape);

template <typename T>
Tensor<T> pool_gather(const Tensor<T>& u, std::shared_ptr<const std::vector<std::int64_t>> idx,
                      Shape out_shape) {
  std::vector<T> out(idx->size());
  for (std::size_t i = 0; i < idx->size(); ++i)
    out[i] = u.at((*idx)[i]);
  Shape in_shape = u.shape();
  return detail::make_op<T>(
      "pool_gather", std::move(out_shape), std::move(out), {u},
      [idx, in_shape](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{pool_scatter(g, idx, in_shape)};
      });
}

template <typename T>
Tensor<T> pool_scatter(const Tensor<T>& g, std::shared_ptr<const std::vector<std::int64_t>> idx,
                       Shape in_shape) {
  std::vector<T> out(static_cast<std::size_t>(shape_numel(in_shape)), T(0));
  for (std::size_t i = 0; i < idx->size(); ++i)
    out[static_cast<std::size_t>((*idx)[i])] += g.at(static_cast<std::int64_t>(i));
  Shape out_shape = g.shape();
  return detail::make_op<T>(
      "pool_scatter", std::move(in_shape), std::move(out), {g},
      [idx, out_shape](TensorNode<T>*, const Tensor<T>& u) {
        return std::vector<Tensor<T>>{pool_gather(u, idx, out_shape)};
      });
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, int k_h, int k_w, int stride_h, int stride_w) {
  if (x.ndim() != 4) fail_op("maxpool2d", "expects NCHW, got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < k_h || w < k_w)
    fail_op("maxpool2d", "window " + std::to_string(k_h) + "x" + std::to_string(k_w) +
                             " larger than input " + shape_str(x.shape()));
  const int ho = (h - k_h) / stride_h + 1;
  const int wo = (w - k_w) / stride_w + 1;
  std::vector<T> out(static_cast<std::size_t>(n) * c * ho * wo);
  auto idx = std::make_shared<std::vector<std::int64_t>>(out.size());
  const T* px = x.data();
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          std::int64_t best_i = -1;
          T best = T(0);
          for (int ky = 0; ky < k_h; ++ky)
            for (int kx = 0; kx < k_w; ++kx) {
              std::int64_t at = ((static_cast<std::int64_t>(b) * c + ch) * h + oy * stride_h + ky) * w +
                                ox * stride_w + kx;
              if (best_i < 0 || px[at] > best) {
                best = px[at];
                best_i = at;
              }
            }
          std::size_t o = static_cast<std::size_t>(((static_cast<std::int64_t>(b) * c + ch) * ho + oy) * wo + ox);
          out[o] = best;
          (*idx)[o] = best_i;
        }
  Shape in_shape = x.shape();
  return detail::make_op<T>(
      "maxpool2d", {n, c, ho, wo}, std::move(out), {x},
      [idx, in_shape](TensorNode<T>*, const Tensor<T>& g) {
        return std::vector<Tensor<T>>{pool_scatter(g, idx, in_shape)};
      });
}

// ---------------------------------------------------------------------------
// Custom-gradient hook: caller supplies the forward values and a raw backward
// map. First-order only; a create_graph pass through it is an error.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> custom_unary(const char* name, const Tensor<T>& x, std::vector<T> forward_values,
                       std::function<std::vector<T>(const std::vector<T>& upstream)> backward_map) {
  if (forward_values.size() != static_cast<std::size_t>(x.numel()))
    fail_op(name, "forward output size does not match input " + shape_str(x.shape()));
  auto bw = std::make_shared<std::function<std::vector<T>(const std::vector<T>&)>>(std::move(backward_map));
  return detail::make_op<T>(
      name, x.shape(), std::move(forward_values), {x},
      [bw](TensorNode<T>* self, const Tensor<T>& g) {
        std::vector<T> mapped = (*bw)(g.vec());
        if (mapped.size() != g.vec().size())
          fail_op(self->op, "backward map changed the gradient size");
        return std::vector<Tensor<T>>{Tensor<T>::from(self->shape, std::move(mapped))};
      },
      /*second_order_ok=*/false);
}

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return mul(x, x);
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, pow_scalar(b, -1.0));
}

// Per-sample L2 norm over all non-batch dims: [N, ...] -> [N].
template <typename T>
Tensor<T> l2_norm_rows(const Tensor<T>& x) {
  return pow_scalar(sum_rows(square(x)), 0.5);
}

// ---------------------------------------------------------------------------
// Backward engine
// ---------------------------------------------------------------------------

// Topologically ordered view of the recorded graph below a root, newest
// first. Creation order is already topological because evaluation is eager.
template <typename T>
struct Tape {
  std::vector<TensorNode<T>*> nodes;
  std::unordered_map<TensorNode<T>*, std::shared_ptr<TensorNode<T>>> keep_alive;
};

template <typename T>
Tape<T> build_tape(const Tensor<T>& root) {
  Tape<T> tape;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<TensorNode<T>*> stack;
  if (root.node()->requires_grad) {
    stack.push_back(root.node());
    seen.insert(root.node());
    tape.keep_alive.emplace(root.node(), root.handle());
  }
  while (!stack.empty()) {
    TensorNode<T>* n = stack.back();
    stack.pop_back();
    tape.nodes.push_back(n);
    for (const auto& p : n->parents) {
      TensorNode<T>* pn = p.node();
      if (!pn->requires_grad || seen.count(pn)) continue;
      seen.insert(pn);
      tape.keep_alive.emplace(pn, p.handle());
      stack.push_back(pn);
    }
  }
  std::sort(tape.nodes.begin(), tape.nodes.end(),
            [](const TensorNode<T>* a, const TensorNode<T>* b) { return a->seq > b->seq; });
  return tape;
}

namespace detail {

template <typename T>
void check_grad_finite(const TensorNode<T>* node, const Tensor<T>& g) {
  for (T v : g.vec())
    if (std::isnan(static_cast<double>(v)))
      throw TensorError(std::string("NaN gradient flowing into op '") + node->op + "'");
}

// Runs reverse accumulation from a scalar root. When `target` is set, only
// nodes lying on a path from the root to the target are visited. Returns the
// per-node gradients for the visited set.
template <typename T>
std::unordered_map<TensorNode<T>*, Tensor<T>> reverse_sweep(const Tensor<T>& root,
                                                            TensorNode<T>* target,
                                                            bool create_graph) {
  if (root.numel() != 1)
    throw TensorError("backward: loss must be a scalar, got " + shape_str(root.shape()));
  std::unordered_map<TensorNode<T>*, Tensor<T>> grads;
  if (!root.node()->requires_grad) return grads;

  Tape<T> tape = build_tape(root);

  std::unordered_set<TensorNode<T>*> relevant;
  if (target) {
    // Ascending pass: a node is relevant iff the target is among its ancestors.
    for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
      TensorNode<T>* n = *it;
      if (n == target) {
        relevant.insert(n);
        continue;
      }
      for (const auto& p : n->parents)
        if (relevant.count(p.node())) {
          relevant.insert(n);
          break;
        }
    }
    if (!relevant.count(root.node())) return grads;
  }

  {
    Tensor<T> seed;
    if (create_graph)
      seed = Tensor<T>::full(root.shape(), T(1));
    else {
      NoGradGuard off;
      seed = Tensor<T>::full(root.shape(), T(1));
    }
    grads.emplace(root.node(), seed);
  }

  for (TensorNode<T>* n : tape.nodes) {
    if (target && !relevant.count(n)) continue;
    auto it = grads.find(n);
    if (it == grads.end()) continue;
    Tensor<T> g = it->second;
    check_grad_finite(n, g);
    if (n->is_leaf || !n->backward) continue;
    if (n == target) continue;  // gradient requested here; do not sweep past it
    if (create_graph && !n->second_order_ok)
      throw TensorError(std::string("op '") + n->op + "' does not support second-order differentiation");
    std::vector<Tensor<T>> parent_grads;
    if (create_graph) {
      parent_grads = n->backward(n, g);
    } else {
      NoGradGuard off;
      parent_grads = n->backward(n, g);
    }
    if (parent_grads.size() != n->parents.size())
      throw TensorError(std::string("op '") + n->op + "' backward rule arity mismatch");
    for (std::size_t i = 0; i < n->parents.size(); ++i) {
      TensorNode<T>* pn = n->parents[i].node();
      if (!pn->requires_grad) continue;
      if (target && !relevant.count(pn)) continue;
      auto found = grads.find(pn);
      if (found == grads.end()) {
        grads.emplace(pn, parent_grads[i]);
      } else if (create_graph) {
        found->second = add(found->second, parent_grads[i]);
      } else {
        NoGradGuard off;
        found->second = add(found->second, parent_grads[i]);
      }
    }
    if (n != root.node()) grads.erase(n);
  }
  return grads;
}

}  // namespace detail

// Accumulates gradients of a scalar loss into the .grad slot of every
// requires_grad leaf below it. Gradients of unflagged tensors are not kept.
template <typename T>
void backward(const Tensor<T>& loss) {
  auto grads = detail::reverse_sweep<T>(loss, nullptr, /*create_graph=*/false);
  for (auto& [node, g] : grads) {
    if (!node->is_leaf || !node->requires_grad) continue;
    detail::check_grad_finite(node, g);
    if (!node->grad) {
      node->grad = g.handle();
    } else {
      NoGradGuard off;
      Tensor<T> prev(node->grad);
      node->grad = add(prev, g).handle();
    }
  }
}

// Gradient of a scalar w.r.t. one tensor. With create_graph the result stays
// on the tape, so a loss built from it backpropagates into the original
// parameters (the double-backward entry point for the gradient penalty).
template <typename T>
Tensor<T> grad_wrt(const Tensor<T>& scalar, const Tensor<T>& wrt, bool create_graph) {
  auto grads = detail::reverse_sweep<T>(scalar, wrt.node(), create_graph);
  auto it = grads.find(wrt.node());
  if (it == grads.end()) return Tensor<T>::zeros(wrt.shape());
  return it->second;
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace bingan

#endif  // BINGAN_TENSOR_HPP_
