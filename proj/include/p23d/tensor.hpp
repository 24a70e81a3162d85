#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "p23d/rng.hpp"

namespace p23d::num {

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Reverse-mode autodiff node. All training math is 64-bit; 32-bit floats
// appear only in serialized checkpoints.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void()> backprop;  // accumulates into inputs' grads

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Value-semantics handle over a graph node. Tensors are immutable once
// created; mutable_data() is reserved for leaf initialization and
// optimizer updates.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->data.size()); }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::vector<double>& grad() const;
  void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }
  double scalar() const;
  double at(int64_t i) const { return node_->data[static_cast<size_t>(i)]; }

  Tensor detach() const;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, bool requires_grad = false);

  NodePtr node_;
};

// Disables graph recording within a scope (inference / sampling).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// --- op vocabulary ---------------------------------------------------------
// Shape rules are documented per op in tensor.cpp next to the kernels.

Tensor add(const Tensor& a, const Tensor& b);       // same shape
Tensor sub(const Tensor& a, const Tensor& b);       // same shape
Tensor mul(const Tensor& a, const Tensor& b);       // same shape
Tensor affine(const Tensor& x, double a, double b); // a*x + b
Tensor scale(const Tensor& x, double s);            // s*x
Tensor matmul(const Tensor& a, const Tensor& b);    // {m,k}x{k,n} or {m,k}x{k}
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int pad);                 // x {Cin,D,H,W}, w {Cout,Cin,k,k,k}
Tensor upsample_nearest3(const Tensor& x, int factor);
Tensor concat_channels(const Tensor& a, const Tensor& b);  // rank-4, dim 0
Tensor expand_channels(const Tensor& x, int channels);     // {1,D,H,W} -> {C,D,H,W}
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);  // bias {C}
Tensor silu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log_t(const Tensor& x);
Tensor exp_t(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor mean_all(const Tensor& x);  // scalar {1}
Tensor sum_all(const Tensor& x);   // scalar {1}
Tensor masked_select(const Tensor& x, const Tensor& mask);  // mask binary, same shape

// Conv output spatial size: (in + 2*pad - k) / stride + 1 (must divide evenly
// is not required; floor semantics, remainder columns dropped).
int conv_out_size(int in, int k, int stride, int pad);

// Backward pass from a scalar loss. Visits each reachable node exactly once
// in reverse topological order; leaves not reachable from the loss keep a
// zero gradient.
void backward(const Tensor& loss);

}  // namespace p23d::num
