#pragma once

// Reverse-mode differentiation over C x H x W tensors.
//
// A Graph is a define-by-run tape: every op evaluates eagerly and appends a
// node holding its value and a backward rule. Nodes are only ever appended,
// so creation order is a topological order and backward() walks it in
// reverse. backward() is const and allocates its own gradient buffers; the
// graph itself is never mutated by differentiation.

#include <cstddef>
#include <functional>
#include <unordered_map>
#include <vector>

#include "pa/tensor.hpp"

namespace pa::grad {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients of a scalar output with respect to each differentiable leaf.
class Gradients {
 public:
  /// Gradient for leaf `x`; zeros when the output does not depend on it.
  const Tensor& of(const Var& x) const;

 private:
  friend class Graph;
  std::unordered_map<std::size_t, Tensor> by_leaf_;
};

/// Write access to per-node gradient buffers during the backward sweep.
class GradSink {
 public:
  /// Buffer accumulating d(output)/d(node), or nullptr when the node does
  /// not lead back to any differentiable leaf.
  Tensor* slot(std::size_t node);

 private:
  friend class Graph;
  GradSink(const Graph& g, std::vector<Tensor>& buffers) : graph_(g), buffers_(buffers) {}
  const Graph& graph_;
  std::vector<Tensor>& buffers_;
};

using BackwardFn = std::function<void(const Tensor& upstream, GradSink& sink)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input held fixed; backward never produces a gradient for it.
  Var constant(Tensor value);
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  /// Records an op result. `inputs` lists the node ids the backward rule may
  /// write to; the rule is dropped when none of them needs a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a 1x1x1 output. Throws ErrorKind::Shape for non-scalar outputs.
  Gradients backward(const Var& output) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- element-wise ---------------------------------------------------------
//
// Binary ops broadcast: each dimension must match or be 1 on one side.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add(const Var& a, double b);
Var mul(const Var& a, double b);
Var sub(double a, const Var& b);
Var div(double a, const Var& b);

Var square(const Var& x);
Var sqrt(const Var& x);
Var relu(const Var& x);
/// Clamp into [lo, hi]; gradient passes through inside the bounds, zero outside.
Var clip(const Var& x, double lo, double hi);
/// x^p for x > 0, and 0 (with zero gradient) for x <= 0.
Var pow(const Var& x, double p);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator+(const Var& a, double b) { return add(a, b); }
inline Var operator-(const Var& a, double b) { return add(a, -b); }
inline Var operator*(const Var& a, double b) { return mul(a, b); }
inline Var operator*(double a, const Var& b) { return mul(b, a); }
inline Var operator-(double a, const Var& b) { return sub(a, b); }
inline Var operator/(double a, const Var& b) { return div(a, b); }

// ---- reductions -----------------------------------------------------------

/// Per-channel mean over H and W; result is C x 1 x 1.
Var spatial_mean(const Var& x);
/// Mean over every element; result is 1x1x1.
Var global_mean(const Var& x);

// ---- spatial --------------------------------------------------------------

/// Convolution weights, out x in x kh x kw row-major, with optional bias.
struct ConvKernel {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;
  std::vector<double> weights;
  std::vector<double> bias;  // empty or `out` entries

  double at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return weights[((o * in + i) * kh + y) * kw + x];
  }
};

/// Cross-correlation with zero padding. Gradient flows to the input only.
Var conv2d(const Var& x, const ConvKernel& kernel, std::size_t stride, std::size_t padding);

/// 2x2 average pooling with stride 2; odd trailing rows/columns are dropped.
Var avg_pool2(const Var& x);

/// x_c / sqrt(sum_k x_k^2 + eps) at every spatial location.
Var channel_l2_normalize(const Var& x, double eps = 1e-10);

/// Normalized 1-D Gaussian taps of odd length `window`.
std::vector<double> gaussian_taps(std::size_t window, double sigma);

/// Per-channel valid-mode filtering with the separable normalized Gaussian;
/// output is C x (H - window + 1) x (W - window + 1).
Var gaussian_filter(const Var& x, std::size_t window, double sigma);

/// Backward warp. `flow` is 2 x H x W: channel 0 displaces rows, channel 1
/// displaces columns. Output(c, i, j) samples the source bilinearly at
/// (i + flow(0,i,j), j + flow(1,i,j)) with coordinates clamped to the image.
Var bilinear_warp(const Var& source, const Var& flow);

}  // namespace pa::grad
