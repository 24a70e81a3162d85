#pragma once

#include <cstdint>
#include <vector>

#include "p23d/tensor.hpp"

namespace p23d::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam over a fixed parameter list. Moments live in
// the optimizer, not on the tensors.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  // Applies one update from the gradients currently stored on the
  // parameters. A non-finite gradient aborts the step (NumericError) with
  // parameters and moments untouched.
  void step();
  void zero_grad();

  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<double>& first_moment(size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  int64_t step_count_ = 0;
};

}  // namespace p23d::num
