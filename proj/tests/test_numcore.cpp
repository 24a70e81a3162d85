#include <cmath>
#include <functional>

#include "doctest.h"
#include "p23d/adam.hpp"
#include "p23d/error.hpp"
#include "p23d/tensor.hpp"

using namespace p23d;
using num::Tensor;

namespace {

// Central finite differences on a scalar-valued function of one leaf.
double finite_diff(const std::function<double()>& eval, Tensor& leaf,
                   int64_t index, double h = 1e-5) {
  auto& d = leaf.mutable_data();
  const double saved = d[size_t(index)];
  d[size_t(index)] = saved + h;
  const double fp = eval();
  d[size_t(index)] = saved - h;
  const double fm = eval();
  d[size_t(index)] = saved;
  return (fp - fm) / (2.0 * h);
}

double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

}  // namespace

TEST_CASE("matmul identity") {
  Rng rng(1);
  const Tensor a = Tensor::randn({3, 3}, rng);
  const Tensor eye =
      Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor out = num::matmul(eye, a);
  for (int64_t i = 0; i < 9; ++i) CHECK(out.at(i) == doctest::Approx(a.at(i)));
}

TEST_CASE("conv3d delta kernel is identity") {
  Rng rng(2);
  const Tensor x = Tensor::randn({1, 4, 4, 4}, rng);
  Tensor w = Tensor::zeros({1, 1, 3, 3, 3});
  w.mutable_data()[13] = 1.0;  // center of the 3x3x3 kernel
  const Tensor b = Tensor::zeros({1});
  const Tensor out = num::conv3d(x, w, b, 1, 1);
  REQUIRE(out.shape() == x.shape());
  for (int64_t i = 0; i < x.size(); ++i) CHECK(out.at(i) == x.at(i));
}

TEST_CASE("concat_channels shapes") {
  const Tensor a = Tensor::zeros({8, 4, 4, 4});
  const Tensor b = Tensor::zeros({1, 4, 4, 4});
  CHECK(num::concat_channels(a, b).shape() == num::Shape{9, 4, 4, 4});
  CHECK_THROWS_AS(num::concat_channels(a, Tensor::zeros({1, 2, 4, 4})),
                  DataError);
}

TEST_CASE("backward analytic quadratic") {
  const double c = 0.7;
  Tensor x = Tensor::from_data({1}, {2.0}, true);
  const Tensor diff = num::affine(x, 1.0, -c);
  const Tensor loss = num::mean_all(num::mul(diff, diff));
  num::backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * (2.0 - c)));
}

TEST_CASE("disconnected leaf keeps zero gradient") {
  Tensor x = Tensor::from_data({1}, {1.0}, true);
  Tensor y = Tensor::from_data({1}, {5.0}, true);
  const Tensor loss = num::mean_all(num::mul(x, x));
  num::backward(loss);
  CHECK(y.grad()[0] == 0.0);
}

TEST_CASE("non-scalar loss rejected") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(num::backward(num::mul(x, x)), DataError);
}

TEST_CASE("gradients match finite differences on random composite graphs") {
  Rng rng(42);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = Tensor::randn({2, 4, 4, 4}, rng, true);
    Tensor w = Tensor::randn({3, 2, 3, 3, 3}, rng, true);
    for (auto& v : w.mutable_data()) v *= 0.3;
    Tensor b = Tensor::randn({3}, rng, true);
    Tensor bias = Tensor::randn({3}, rng, true);
    Tensor m = Tensor::zeros({1, 4, 4, 4});
    for (auto& v : m.mutable_data()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    m.mutable_data()[0] = 1.0;  // nonempty selection
    const int variant = trial % 5;
    auto eval = [&]() {
      Tensor h = num::conv3d(x, w, b, 1, 1);
      h = num::add_channel_bias(h, bias);
      switch (variant) {
        case 0: h = num::silu(h); break;
        case 1: h = num::sigmoid(h); break;
        case 2: h = num::relu(num::scale(h, 1.3)); break;
        case 3: h = num::mul(h, h); break;
        case 4:
          h = num::concat_channels(num::upsample_nearest3(num::silu(h), 1),
                                   num::expand_channels(m, 3));
          break;
      }
      if (variant == 1) {
        const Tensor sel = num::masked_select(
            h, num::concat_channels(num::expand_channels(m, 2),
                                    num::expand_channels(m, 1)));
        return num::mean_all(num::mul(sel, sel)).scalar();
      }
      return num::mean_all(num::mul(h, h)).scalar();
    };
    // graph once for reverse-mode gradients
    Tensor h = num::conv3d(x, w, b, 1, 1);
    h = num::add_channel_bias(h, bias);
    switch (variant) {
      case 0: h = num::silu(h); break;
      case 1: h = num::sigmoid(h); break;
      case 2: h = num::relu(num::scale(h, 1.3)); break;
      case 3: h = num::mul(h, h); break;
      case 4:
        h = num::concat_channels(num::upsample_nearest3(num::silu(h), 1),
                                 num::expand_channels(m, 3));
        break;
    }
    Tensor loss;
    if (variant == 1) {
      const Tensor sel = num::masked_select(
          h, num::concat_channels(num::expand_channels(m, 2),
                                  num::expand_channels(m, 1)));
      loss = num::mean_all(num::mul(sel, sel));
    } else {
      loss = num::mean_all(num::mul(h, h));
    }
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    bias.zero_grad();
    num::backward(loss);
    // probe a few coordinates per leaf
    Tensor* leaves[] = {&x, &w, &b, &bias};
    for (Tensor* leaf : leaves) {
      const int64_t idx = int64_t(rng.next_below(uint64_t(leaf->size())));
      const double fd = finite_diff(eval, *leaf, idx);
      const double an = leaf->grad()[size_t(idx)];
      CHECK(rel_err(fd, an) <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked == 400);
}

TEST_CASE("shape algebra") {
  CHECK(num::conv_out_size(16, 3, 2, 1) == 8);
  CHECK(num::conv_out_size(4, 3, 1, 1) == 4);
  CHECK(num::conv_out_size(4, 1, 1, 0) == 4);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + int(rng.next_below(8));
    const int cin = 1 + int(rng.next_below(3));
    const int cout = 1 + int(rng.next_below(3));
    const int k = rng.uniform() < 0.5 ? 1 : 3;
    const int stride = 1 + int(rng.next_below(2));
    const int pad = k / 2;
    if (d + 2 * pad < k) continue;
    const Tensor x = Tensor::zeros({cin, d, d, d});
    const Tensor w = Tensor::zeros({cout, cin, k, k, k});
    const Tensor b = Tensor::zeros({cout});
    const auto out = num::conv3d(x, w, b, stride, pad).shape();
    const int expect = (d + 2 * pad - k) / stride + 1;
    CHECK(out == num::Shape{cout, expect, expect, expect});
    const auto up = num::upsample_nearest3(x, 2).shape();
    CHECK(up == num::Shape{cin, 2 * d, 2 * d, 2 * d});
  }
}

TEST_CASE("non-finite forward is an error") {
  Tensor x = Tensor::from_data({1}, {1e308});
  CHECK_THROWS_AS(num::mul(x, x), NumericError);
}

TEST_CASE("adam zero gradient leaves params unchanged") {
  Tensor p = Tensor::from_data({2}, {1.0, -2.0}, true);
  num::Adam opt({p}, {.lr = 0.1});
  p.zero_grad();
  opt.step();
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == -2.0);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam first step from zero state") {
  const double g = 0.37, lr = 0.01, eps = 1e-8;
  Tensor p = Tensor::from_data({1}, {0.5}, true);
  num::Adam opt({p}, {.lr = lr, .eps = eps});
  p.node_->ensure_grad();
  p.node_->grad[0] = g;
  opt.step();
  // mhat = g, vhat = g^2 => delta = -lr * g / (|g| + eps)
  const double expect = 0.5 - lr * g / (std::abs(g) + eps);
  CHECK(p.at(0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam constant gradient approaches lr-sized steps") {
  const double g = 2.5, lr = 0.05;
  Tensor p = Tensor::from_data({1}, {0.0}, true);
  num::Adam opt({p}, {.lr = lr});
  double prev = 0.0;
  double last_step = 0.0;
  for (int i = 0; i < 300; ++i) {
    p.node_->ensure_grad();
    p.node_->grad[0] = g;
    opt.step();
    last_step = std::abs(p.at(0) - prev);
    prev = p.at(0);
  }
  CHECK(last_step == doctest::Approx(lr).epsilon(1e-3));
}

TEST_CASE("adam rejects non-finite gradients") {
  Tensor p = Tensor::from_data({1}, {0.0}, true);
  num::Adam opt({p}, {});
  p.node_->ensure_grad();
  p.node_->grad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(opt.step(), NumericError);
  CHECK(opt.step_count() == 0);
  CHECK(p.at(0) == 0.0);
}

TEST_CASE("rng determinism and distribution") {
  Rng a(123), b(123);
  const Tensor ta = Tensor::randn({100}, a);
  const Tensor tb = Tensor::randn({100}, b);
  for (int64_t i = 0; i < 100; ++i) CHECK(ta.at(i) == tb.at(i));

  Rng c(123), d(456);
  int differing = 0;
  for (int i = 0; i < 1000; ++i) {
    if (c.normal() != d.normal()) ++differing;
  }
  CHECK(differing >= 990);

  Rng e(7);
  double sum = 0.0, sq = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double v = e.normal();
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("fixed seed gives bit-identical training trajectories") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    Tensor w = Tensor::randn({4, 4}, rng, true);
    Tensor v = Tensor::randn({4}, rng, true);
    num::Adam opt({w, v}, {.lr = 0.01});
    std::vector<double> trace;
    for (int it = 0; it < 20; ++it) {
      opt.zero_grad();
      const Tensor h = num::silu(num::matmul(w, v));
      const Tensor loss = num::mean_all(num::mul(h, h));
      num::backward(loss);
      opt.step();
      trace.push_back(loss.scalar());
      trace.push_back(w.at(0));
    }
    return trace;
  };
  CHECK(run(99) == run(99));
}
