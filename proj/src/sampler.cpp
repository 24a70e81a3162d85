#include "p23d/sampler.hpp"

#include "p23d/error.hpp"

namespace p23d {

using num::Tensor;

void Schedule::validate() const {
  if (total < 1) throw DataError("schedule: total steps must be >= 1");
  if (inpaint < 0 || inpaint > total) {
    throw DataError("schedule: inpaint steps must be in [0, total]");
  }
}

VelocityFn velocity_from_net(const InpaintNet& net,
                             const std::vector<double>& cond) {
  return [&net, cond](const Tensor& x, const Tensor& mask, double sigma) {
    return inpaint_forward(net, concat_mask(x, mask), sigma, cond);
  };
}

num::Tensor euler_step(const VelocityFn& velocity, const num::Tensor& x,
                       const num::Tensor& m, double sigma, double delta) {
  if (sigma <= 0.0 || sigma > 1.0) {
    throw DataError("euler_step: sigma must be in (0, 1]");
  }
  if (delta <= 0.0 || delta > sigma + 1e-12) {
    throw DataError("euler_step: delta must be in (0, sigma]");
  }
  const Tensor v = velocity(x, m, sigma);
  if (v.shape() != x.shape()) {
    throw DataError("euler_step: velocity shape mismatch");
  }
  return num::sub(x, num::scale(v, delta));
}

num::Tensor staged_sample(const VelocityFn& velocity, const num::Tensor& q_vis,
                          const num::Tensor& m_s, const Schedule& sched,
                          Rng& rng, const StagedSampleOptions& opts) {
  sched.validate();
  num::NoGradGuard ng;
  const Tensor eps = Tensor::randn(q_vis.shape(), rng);
  const Tensor ones = Tensor::full(m_s.shape(), 1.0);
  const Tensor me = num::expand_channels(m_s, q_vis.shape()[0]);
  Tensor x = mix_latent(q_vis, m_s, eps);
  for (int k = 0; k < sched.total; ++k) {
    const double sigma = sched.sigma(k);
    const bool stage1 = k < sched.inpaint;
    const Tensor& mask = stage1 ? m_s : ones;
    x = euler_step(velocity, x, mask, sigma, sched.delta());
    if (opts.reanchor && stage1) {
      // optional RePaint-style re-blend of the clean prior latent
      x = num::add(num::mul(me, q_vis),
                   num::mul(num::affine(me, -1.0, 1.0), x));
    }
    if (opts.trace) {
      opts.trace->sigmas.push_back(sigma);
      opts.trace->all_ones_mask.push_back(stage1 ? 0 : 1);
      opts.trace->states.push_back(x);
    }
  }
  return x;
}

num::Tensor staged_sample(const InpaintNet& net, const num::Tensor& q_vis,
                          const num::Tensor& m_s,
                          const std::vector<double>& cond,
                          const Schedule& sched, Rng& rng,
                          const StagedSampleOptions& opts) {
  return staged_sample(velocity_from_net(net, cond), q_vis, m_s, sched, rng,
                       opts);
}

num::Tensor repair_noisy_prior(const VelocityFn& velocity,
                               const num::Tensor& q_vis, int k_steps,
                               double strength, Rng& rng) {
  if (k_steps < 1) throw DataError("repair: k_steps must be >= 1");
  if (strength <= 0.0 || strength > 1.0) {
    throw DataError("repair: strength must be in (0, 1]");
  }
  num::NoGradGuard ng;
  const Tensor eps = Tensor::randn(q_vis.shape(), rng);
  const Tensor ones =
      Tensor::full({1, q_vis.shape()[1], q_vis.shape()[2], q_vis.shape()[3]},
                   1.0);
  Tensor x = num::add(num::scale(q_vis, 1.0 - strength),
                      num::scale(eps, strength));
  for (int k = 0; k < k_steps; ++k) {
    const double sigma = strength * (1.0 - double(k) / double(k_steps));
    x = euler_step(velocity, x, ones, sigma, strength / double(k_steps));
  }
  return x;
}

num::Tensor repair_noisy_prior(const InpaintNet& net, const num::Tensor& q_vis,
                               int k_steps, double strength,
                               const std::vector<double>& cond, Rng& rng) {
  return repair_noisy_prior(velocity_from_net(net, cond), q_vis, k_steps,
                            strength, rng);
}

OccupancyGrid generate_grid(const InpaintNet& net, const VaeParams& vae,
                            const num::Tensor& q_vis, const num::Tensor& m_s,
                            const std::vector<double>& cond,
                            const Schedule& sched, double threshold, Rng& rng,
                            const StagedSampleOptions& opts) {
  if (net.config.r != vae.config.r || net.config.c_s != vae.config.c_s) {
    throw DataError("generate: inpainting model and autoencoder disagree");
  }
  const Tensor q_pred = staged_sample(net, q_vis, m_s, cond, sched, rng, opts);
  return decode_ss(q_pred, vae, threshold);
}

}  // namespace p23d
