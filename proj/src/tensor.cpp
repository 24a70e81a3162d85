#include "p23d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "p23d/error.hpp"

namespace p23d::num {

namespace {

thread_local bool g_grad_enabled = true;

void check_finite(const Node& n, const char* op) {
  for (double v : n.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by op '") +
                         op + "'");
    }
  }
}

NodePtr make_node(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data.assign(static_cast<size_t>(numel(n->shape)), 0.0);
  n->requires_grad = requires_grad;
  return n;
}

bool track(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t->node_->requires_grad) return true;
  }
  return false;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DataError(std::string(op) + ": shape mismatch " +
                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank4(const Tensor& t, const char* op) {
  if (t.shape().size() != 4) {
    throw DataError(std::string(op) + ": expected rank-4 tensor, got " +
                    shape_str(t.shape()));
  }
}

}  // namespace

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DataError("non-positive dimension in shape");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::scalar() const {
  if (node_->data.size() != 1) {
    throw DataError("scalar() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

Tensor Tensor::detach() const {
  auto n = make_node(node_->shape, false);
  n->data = node_->data;
  return Tensor(n);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = make_node(std::move(shape), requires_grad);
  std::fill(n->data.begin(), n->data.end(), value);
  return Tensor(n);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (numel(shape) != static_cast<int64_t>(data.size())) {
    throw DataError("from_data: shape/data size mismatch");
  }
  auto n = make_node(std::move(shape), requires_grad);
  n->data = std::move(data);
  return Tensor(n);
}

Tensor Tensor::randn(Shape shape, Rng& rng, bool requires_grad) {
  auto n = make_node(std::move(shape), requires_grad);
  for (auto& v : n->data) v = rng.normal();
  return Tensor(n);
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto out = make_node(a.shape(), track({&a, &b}));
  const size_t n = out->data.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.at(i) + b.at(i);
  check_finite(*out, "add");
  if (out->requires_grad) {
    out->inputs = {a.node_, b.node_};
    Node* o = out.get();
    Node* an = a.node_.get();
    Node* bn = b.node_.get();
    out->backprop = [o, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += o->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = make_node(a.shape(), track({&a, &b}));
  const size_t n = out->data.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.at(i) - b.at(i);
  check_finite(*out, "sub");
  if (out->requires_grad) {
    out->inputs = {a.node_, b.node_};
    Node* o = out.get();
    Node* an = a.node_.get();
    Node* bn = b.node_.get();
    out->backprop = [o, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] -= o->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto out = make_node(a.shape(), track({&a, &b}));
  const size_t n = out->data.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.at(i) * b.at(i);
  check_finite(*out, "mul");
  if (out->requires_grad) {
    out->inputs = {a.node_, b.node_};
    Node* o = out.get();
    Node* an = a.node_.get();
    Node* bn = b.node_.get();
    out->backprop = [o, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i)
          an->grad[i] += o->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i)
          bn->grad[i] += o->grad[i] * an->data[i];
      }
    };
  }
  return Tensor(out);
}

Tensor affine(const Tensor& x, double a, double b) {
  auto out = make_node(x.shape(), track({&x}));
  const size_t n = out->data.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a * x.at(i) + b;
  check_finite(*out, "affine");
  if (out->requires_grad) {
    out->inputs = {x.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    out->backprop = [o, xn, a] {
      xn->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i) xn->grad[i] += a * o->grad[i];
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& x, double s) { return affine(x, s, 0.0); }

// --- matmul ----------------------------------------------------------------
// a {m,k} x b {k,n} -> {m,n}; b may be rank-1 {k} -> {m}.

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2) throw DataError("matmul: lhs must be rank 2");
  const bool vec = b.shape().size() == 1;
  if (!vec && b.shape().size() != 2)
    throw DataError("matmul: rhs must be rank 1 or 2");
  const int m = a.shape()[0];
  const int k = a.shape()[1];
  const int kb = b.shape()[0];
  const int n = vec ? 1 : b.shape()[1];
  if (k != kb) {
    throw DataError("matmul: inner dims differ " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
  }
  Shape out_shape = vec ? Shape{m} : Shape{m, n};
  auto out = make_node(out_shape, track({&a, &b}));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a.at(i * k + p) * b.at(p * n + j);
      out->data[static_cast<size_t>(i) * n + j] = acc;
    }
  }
  check_finite(*out, "matmul");
  if (out->requires_grad) {
    out->inputs = {a.node_, b.node_};
    Node* o = out.get();
    Node* an = a.node_.get();
    Node* bn = b.node_.get();
    out->backprop = [o, an, bn, m, k, n] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j)
              acc += o->grad[static_cast<size_t>(i) * n + j] *
                     bn->data[static_cast<size_t>(p) * n + j];
            an->grad[static_cast<size_t>(i) * k + p] += acc;
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
              acc += an->data[static_cast<size_t>(i) * k + p] *
                     o->grad[static_cast<size_t>(i) * n + j];
            bn->grad[static_cast<size_t>(p) * n + j] += acc;
          }
      }
    };
  }
  return Tensor(out);
}

// --- conv3d ----------------------------------------------------------------
// x {Cin,D,H,W}, w {Cout,Cin,k,k,k} odd k, zero padding, configurable stride.
// out {Cout, od, oh, ow} with o = (in + 2*pad - k)/stride + 1.

int conv_out_size(int in, int k, int stride, int pad) {
  const int span = in + 2 * pad - k;
  if (span < 0 || stride < 1) {
    throw DataError("conv3d: kernel/stride incompatible with spatial size");
  }
  return span / stride + 1;
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad) {
  require_rank4(x, "conv3d");
  if (w.shape().size() != 5) throw DataError("conv3d: weight must be rank 5");
  const int cin = x.shape()[0], D = x.shape()[1], H = x.shape()[2],
            W = x.shape()[3];
  const int cout = w.shape()[0];
  const int k = w.shape()[2];
  if (w.shape()[1] != cin || w.shape()[3] != k || w.shape()[4] != k) {
    throw DataError("conv3d: weight shape " + shape_str(w.shape()) +
                    " incompatible with input " + shape_str(x.shape()));
  }
  if (k % 2 == 0) throw DataError("conv3d: kernel size must be odd");
  if (bias.shape() != Shape{cout}) throw DataError("conv3d: bad bias shape");
  const int od = conv_out_size(D, k, stride, pad);
  const int oh = conv_out_size(H, k, stride, pad);
  const int ow = conv_out_size(W, k, stride, pad);

  auto out = make_node({cout, od, oh, ow}, track({&x, &w, &bias}));
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* od_ptr = out->data.data();
  const int64_t x_c = static_cast<int64_t>(D) * H * W;
  const int64_t x_d = static_cast<int64_t>(H) * W;
  const int64_t o_c = static_cast<int64_t>(od) * oh * ow;
  const int64_t o_d = static_cast<int64_t>(oh) * ow;
  const int64_t w_co = static_cast<int64_t>(cin) * k * k * k;
  const int64_t w_ci = static_cast<int64_t>(k) * k * k;

  // row-sweep accumulation: for each kernel tap, add a contiguous slice of
  // the input row into the output row (keeps the inner loop vectorizable)
  for (int co = 0; co < cout; ++co) {
    const double b = bias.at(co);
    double* orow0 = od_ptr + co * o_c;
    for (int64_t i = 0; i < o_c; ++i) orow0[i] = b;
    for (int zo = 0; zo < od; ++zo) {
      const int zi0 = zo * stride - pad;
      for (int yo = 0; yo < oh; ++yo) {
        const int yi0 = yo * stride - pad;
        double* orow = od_ptr + co * o_c + zo * o_d + yo * ow;
        for (int ci = 0; ci < cin; ++ci) {
          const double* xc = xd + ci * x_c;
          const double* wc = wd + co * w_co + ci * w_ci;
          for (int kz = 0; kz < k; ++kz) {
            const int zi = zi0 + kz;
            if (zi < 0 || zi >= D) continue;
            for (int ky = 0; ky < k; ++ky) {
              const int yi = yi0 + ky;
              if (yi < 0 || yi >= H) continue;
              const double* xrow = xc + zi * x_d + yi * W;
              const double* wrow = wc + (kz * k + ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                const double wv = wrow[kx];
                const int off = kx - pad;
                // xo range with xi = xo*stride + off inside [0, W)
                int lo = 0, hi = ow;
                if (off < 0) lo = (-off + stride - 1) / stride;
                hi = std::min<int64_t>(hi, (int64_t(W) - off + stride - 1) / stride);
                if (stride == 1) {
                  const double* xs = xrow + off;
                  for (int xo = lo; xo < hi; ++xo) orow[xo] += xs[xo] * wv;
                } else {
                  for (int xo = lo; xo < hi; ++xo)
                    orow[xo] += xrow[xo * stride + off] * wv;
                }
              }
            }
          }
        }
      }
    }
  }
  check_finite(*out, "conv3d");
  if (out->requires_grad) {
    out->inputs = {x.node_, w.node_, bias.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    Node* wn = w.node_.get();
    Node* bn = bias.node_.get();
    out->backprop = [o, xn, wn, bn, cin, cout, D, H, W, k, od, oh, ow, stride,
                     pad, x_c, x_d, o_c, o_d, w_co, w_ci] {
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int co = 0; co < cout; ++co) {
          double acc = 0.0;
          const double* g = o->grad.data() + co * o_c;
          for (int64_t i = 0; i < o_c; ++i) acc += g[i];
          bn->grad[co] += acc;
        }
      }
      const bool need_x = xn->requires_grad;
      const bool need_w = wn->requires_grad;
      if (need_x) xn->ensure_grad();
      if (need_w) wn->ensure_grad();
      if (!need_x && !need_w) return;
      for (int co = 0; co < cout; ++co) {
        for (int zo = 0; zo < od; ++zo) {
          const int zi0 = zo * stride - pad;
          for (int yo = 0; yo < oh; ++yo) {
            const int yi0 = yo * stride - pad;
            const double* grow = o->grad.data() + co * o_c + zo * o_d + yo * ow;
            for (int ci = 0; ci < cin; ++ci) {
              for (int kz = 0; kz < k; ++kz) {
                const int zi = zi0 + kz;
                if (zi < 0 || zi >= D) continue;
                for (int ky = 0; ky < k; ++ky) {
                  const int yi = yi0 + ky;
                  if (yi < 0 || yi >= H) continue;
                  const int64_t xrow_off = ci * x_c + zi * x_d + yi * W;
                  const int64_t wrow_off =
                      co * w_co + ci * w_ci + int64_t(kz * k + ky) * k;
                  for (int kx = 0; kx < k; ++kx) {
                    const int off = kx - pad;
                    int lo = 0;
                    if (off < 0) lo = (-off + stride - 1) / stride;
                    const int hi = int(std::min<int64_t>(
                        ow, (int64_t(W) - off + stride - 1) / stride));
                    if (need_x) {
                      double* dx = xn->grad.data() + xrow_off;
                      const double wv = wn->data[wrow_off + kx];
                      if (stride == 1) {
                        double* dxs = dx + off;
                        for (int xo = lo; xo < hi; ++xo) dxs[xo] += grow[xo] * wv;
                      } else {
                        for (int xo = lo; xo < hi; ++xo)
                          dx[xo * stride + off] += grow[xo] * wv;
                      }
                    }
                    if (need_w) {
                      const double* xr = xn->data.data() + xrow_off;
                      double acc = 0.0;
                      if (stride == 1) {
                        const double* xs = xr + off;
                        for (int xo = lo; xo < hi; ++xo) acc += grow[xo] * xs[xo];
                      } else {
                        for (int xo = lo; xo < hi; ++xo)
                          acc += grow[xo] * xr[xo * stride + off];
                      }
                      wn->grad[wrow_off + kx] += acc;
                    }
                  }
                }
              }
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

// --- upsample / channel ops ------------------------------------------------

Tensor upsample_nearest3(const Tensor& x, int factor) {
  require_rank4(x, "upsample_nearest3");
  if (factor < 1) throw DataError("upsample_nearest3: factor must be >= 1");
  const int C = x.shape()[0], D = x.shape()[1], H = x.shape()[2],
            W = x.shape()[3];
  const int od = D * factor, oh = H * factor, ow = W * factor;
  auto out = make_node({C, od, oh, ow}, track({&x}));
  for (int c = 0; c < C; ++c)
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const int64_t src =
              ((static_cast<int64_t>(c) * D + z / factor) * H + y / factor) *
                  W +
              xx / factor;
          out->data[((static_cast<int64_t>(c) * od + z) * oh + y) * ow + xx] =
              x.at(src);
        }
  if (out->requires_grad) {
    out->inputs = {x.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    out->backprop = [o, xn, C, D, H, W, factor, od, oh, ow] {
      xn->ensure_grad();
      for (int c = 0; c < C; ++c)
        for (int z = 0; z < od; ++z)
          for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
              const int64_t src =
                  ((static_cast<int64_t>(c) * D + z / factor) * H +
                   y / factor) *
                      W +
                  xx / factor;
              xn->grad[src] +=
                  o->grad[((static_cast<int64_t>(c) * od + z) * oh + y) * ow +
                          xx];
            }
    };
  }
  return Tensor(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  for (int d = 1; d < 4; ++d) {
    if (a.shape()[d] != b.shape()[d]) {
      throw DataError("concat_channels: spatial shapes differ " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
  }
  const int ca = a.shape()[0], cb = b.shape()[0];
  auto out = make_node(
      {ca + cb, a.shape()[1], a.shape()[2], a.shape()[3]}, track({&a, &b}));
  std::copy(a.data().begin(), a.data().end(), out->data.begin());
  std::copy(b.data().begin(), b.data().end(),
            out->data.begin() + a.data().size());
  if (out->requires_grad) {
    out->inputs = {a.node_, b.node_};
    Node* o = out.get();
    Node* an = a.node_.get();
    Node* bn = b.node_.get();
    out->backprop = [o, an, bn] {
      const size_t na = an->data.size();
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < na; ++i) an->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < bn->data.size(); ++i)
          bn->grad[i] += o->grad[na + i];
      }
    };
  }
  return Tensor(out);
}

Tensor expand_channels(const Tensor& x, int channels) {
  require_rank4(x, "expand_channels");
  if (x.shape()[0] != 1) throw DataError("expand_channels: input must have 1 channel");
  const int64_t spatial = x.size();
  auto out = make_node({channels, x.shape()[1], x.shape()[2], x.shape()[3]},
                       track({&x}));
  for (int c = 0; c < channels; ++c)
    std::copy(x.data().begin(), x.data().end(),
              out->data.begin() + static_cast<size_t>(c) * spatial);
  if (out->requires_grad) {
    out->inputs = {x.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    out->backprop = [o, xn, channels, spatial] {
      xn->ensure_grad();
      for (int c = 0; c < channels; ++c)
        for (int64_t i = 0; i < spatial; ++i)
          xn->grad[i] += o->grad[static_cast<size_t>(c) * spatial + i];
    };
  }
  return Tensor(out);
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank4(x, "add_channel_bias");
  const int C = x.shape()[0];
  if (bias.shape() != Shape{C}) {
    throw DataError("add_channel_bias: bias shape mismatch");
  }
  const int64_t spatial = x.size() / C;
  auto out = make_node(x.shape(), track({&x, &bias}));
  for (int c = 0; c < C; ++c) {
    const double b = bias.at(c);
    for (int64_t i = 0; i < spatial; ++i) {
      const size_t idx = static_cast<size_t>(c) * spatial + i;
      out->data[idx] = x.at(idx) + b;
    }
  }
  check_finite(*out, "add_channel_bias");
  if (out->requires_grad) {
    out->inputs = {x.node_, bias.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    Node* bn = bias.node_.get();
    out->backprop = [o, xn, bn, C, spatial] {
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) xn->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int64_t i = 0; i < spatial; ++i)
            acc += o->grad[static_cast<size_t>(c) * spatial + i];
          bn->grad[c] += acc;
        }
      }
    };
  }
  return Tensor(out);
}

// --- pointwise nonlinearities ----------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor pointwise(const Tensor& x, const char* name, Fwd fwd, Bwd dfdx) {
  auto out = make_node(x.shape(), track({&x}));
  const size_t n = out->data.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = fwd(x.at(i));
  check_finite(*out, name);
  if (out->requires_grad) {
    out->inputs = {x.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    out->backprop = [o, xn, dfdx] {
      xn->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i)
        xn->grad[i] += o->grad[i] * dfdx(xn->data[i], o->data[i]);
    };
  }
  return Tensor(out);
}

double sigmoid_s(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

// SiLU is the project-wide activation (x * sigmoid(x)).
Tensor silu(const Tensor& x) {
  return pointwise(
      x, "silu", [](double v) { return v * sigmoid_s(v); },
      [](double v, double) {
        const double s = sigmoid_s(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor relu(const Tensor& x) {
  return pointwise(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return pointwise(
      x, "sigmoid", sigmoid_s, [](double, double y) { return y * (1.0 - y); });
}

Tensor log_t(const Tensor& x) {
  return pointwise(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor exp_t(const Tensor& x) {
  return pointwise(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

// Gradient is pass-through inside [lo, hi], zero outside.
Tensor clamp(const Tensor& x, double lo, double hi) {
  return pointwise(
      x, "clamp",
      [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) {
        return (v >= lo && v <= hi) ? 1.0 : 0.0;
      });
}

// --- reductions ------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  auto out = make_node({1}, track({&x}));
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out->data[0] = acc;
  check_finite(*out, "sum");
  if (out->requires_grad) {
    out->inputs = {x.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    out->backprop = [o, xn] {
      xn->ensure_grad();
      for (auto& g : xn->grad) g += o->grad[0];
    };
  }
  return Tensor(out);
}

Tensor mean_all(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  auto out = make_node({1}, track({&x}));
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out->data[0] = acc * inv;
  check_finite(*out, "mean");
  if (out->requires_grad) {
    out->inputs = {x.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    out->backprop = [o, xn, inv] {
      xn->ensure_grad();
      const double g = o->grad[0] * inv;
      for (auto& gv : xn->grad) gv += g;
    };
  }
  return Tensor(out);
}

Tensor masked_select(const Tensor& x, const Tensor& mask) {
  require_same_shape(x, mask, "masked_select");
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < mask.size(); ++i) {
    const double m = mask.at(i);
    if (m != 0.0 && m != 1.0)
      throw DataError("masked_select: mask entries must be 0 or 1");
    if (m == 1.0) idx.push_back(i);
  }
  if (idx.empty()) throw DataError("masked_select: empty selection");
  auto out = make_node({static_cast<int>(idx.size())}, track({&x}));
  for (size_t i = 0; i < idx.size(); ++i) out->data[i] = x.at(idx[i]);
  if (out->requires_grad) {
    out->inputs = {x.node_};
    Node* o = out.get();
    Node* xn = x.node_.get();
    out->backprop = [o, xn, idx = std::move(idx)] {
      xn->ensure_grad();
      for (size_t i = 0; i < idx.size(); ++i)
        xn->grad[static_cast<size_t>(idx[i])] += o->grad[i];
    };
  }
  return Tensor(out);
}

// --- backward --------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw DataError("backward: loss must be a defined scalar tensor");
  }
  // Iterative post-order DFS for the reverse topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node_.get(), 0);
  visited.insert(loss.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->backprop && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node_->ensure_grad();
  loss.node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop();
  }
}

}  // namespace p23d::num
