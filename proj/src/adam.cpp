#include "p23d/adam.hpp"

#include <cmath>

#include "p23d/error.hpp"

namespace p23d::num {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (config_.lr <= 0.0) throw DataError("adam: lr must be > 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    m_.emplace_back(p.data().size(), 0.0);
    v_.emplace_back(p.data().size(), 0.0);
  }
}

void Adam::step() {
  // Validate all gradients before touching any state.
  for (auto& p : params_) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient");
    }
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, double(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, double(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& data = params_[i].mutable_data();
    const auto& grad = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < data.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * grad[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * grad[j] * grad[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      data[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace p23d::num
