#pragma once

#include <functional>
#include <vector>

#include "p23d/latent.hpp"

namespace p23d {

// Uniform descending sigma grid: sigma_k = 1 - k/total (accumulated by
// index, never by repeated subtraction, so sigma reaches 0 exactly).
struct Schedule {
  int total = 50;
  int inpaint = 25;

  double sigma(int k) const { return 1.0 - double(k) / double(total); }
  double delta() const { return 1.0 / double(total); }
  void validate() const;
};

// Velocity field interface; the network wrapper is the production path and
// hand-built fields keep the integrator testable in closed form.
using VelocityFn = std::function<num::Tensor(
    const num::Tensor& x, const num::Tensor& mask, double sigma)>;

VelocityFn velocity_from_net(const InpaintNet& net,
                             const std::vector<double>& cond);

// x' = x - delta * v(x, m, sigma).
num::Tensor euler_step(const VelocityFn& velocity, const num::Tensor& x,
                       const num::Tensor& m, double sigma, double delta);

struct SampleTrace {
  std::vector<double> sigmas;          // sigma fed to the net at each step
  std::vector<uint8_t> all_ones_mask;  // 1 when the step used m_1
  std::vector<num::Tensor> states;     // state after each step
};

struct StagedSampleOptions {
  bool reanchor = false;  // re-blend q_vis under m_s after stage-1 steps
  SampleTrace* trace = nullptr;
};

// Staged generation: init per Eq.-style mixing, first `inpaint` steps use
// the visibility mask, the remaining steps the all-ones mask.
num::Tensor staged_sample(const VelocityFn& velocity, const num::Tensor& q_vis,
                          const num::Tensor& m_s, const Schedule& sched,
                          Rng& rng, const StagedSampleOptions& opts = {});

num::Tensor staged_sample(const InpaintNet& net, const num::Tensor& q_vis,
                          const num::Tensor& m_s,
                          const std::vector<double>& cond,
                          const Schedule& sched, Rng& rng,
                          const StagedSampleOptions& opts = {});

// Diffuse-then-denoise repair for noisy priors: push q_vis to
// sigma = strength against fresh noise, then integrate k steps back to 0
// under the all-ones mask.
num::Tensor repair_noisy_prior(const VelocityFn& velocity,
                               const num::Tensor& q_vis, int k_steps,
                               double strength, Rng& rng);

num::Tensor repair_noisy_prior(const InpaintNet& net, const num::Tensor& q_vis,
                               int k_steps, double strength,
                               const std::vector<double>& cond, Rng& rng);

// decode(staged_sample(...)) binarized at `threshold`.
OccupancyGrid generate_grid(const InpaintNet& net, const VaeParams& vae,
                            const num::Tensor& q_vis, const num::Tensor& m_s,
                            const std::vector<double>& cond,
                            const Schedule& sched, double threshold, Rng& rng,
                            const StagedSampleOptions& opts = {});

}  // namespace p23d
