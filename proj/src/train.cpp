#include "p23d/train.hpp"

#include <sstream>

#include "p23d/adam.hpp"
#include "p23d/error.hpp"

namespace p23d {

using num::Tensor;

double mean_reconstruction_iou(const VaeParams& vae,
                               const std::vector<OccupancyGrid>& grids,
                               double threshold) {
  num::NoGradGuard ng;
  double acc = 0.0;
  for (const auto& g : grids) {
    const OccupancyGrid rec = decode_ss(encode_ss(g, vae), vae, threshold);
    acc += grid_iou(rec, g);
  }
  return acc / double(grids.size());
}

VaeTrainResult train_vae(VaeParams& vae, const std::vector<OccupancyGrid>& grids,
                         const VaeTrainConfig& config, Rng& rng,
                         const LogFn& log) {
  if (grids.empty()) throw DataError("train_vae: no training grids");
  num::Adam opt(vae.trainable(), {.lr = config.lr});
  VaeTrainResult result;
  for (int it = 1; it <= config.iterations; ++it) {
    opt.zero_grad();
    Tensor total;
    for (int b = 0; b < config.batch; ++b) {
      const auto& g = grids[size_t(rng.next_below(grids.size()))];
      Tensor loss = vae_loss(g, vae, config.beta, config.variational,
                             config.variational ? &rng : nullptr);
      total = total.defined() ? num::add(total, loss) : loss;
    }
    total = num::scale(total, 1.0 / double(config.batch));
    num::backward(total);
    opt.step();
    result.iterations_run = it;
    if (it % config.eval_every == 0 || it == config.iterations) {
      result.train_iou = mean_reconstruction_iou(vae, grids);
      if (log) {
        std::ostringstream os;
        os << "vae iter " << it << " loss " << total.scalar() << " train-iou "
           << result.train_iou;
        log(os.str());
      }
      if (result.train_iou >= config.target_iou) break;
    }
  }
  return result;
}

void train_inpaint(InpaintNet& net, const std::vector<TrainingPair>& pairs,
                   const InpaintTrainConfig& config, Rng& rng,
                   const LogFn& log) {
  if (pairs.empty()) throw DataError("train_inpaint: no training pairs");
  num::Adam opt(net.trainable(), {.lr = config.lr});
  const auto& c = net.config;
  const Tensor ones = Tensor::full({1, c.r, c.r, c.r}, 1.0);
  for (int it = 1; it <= config.iterations; ++it) {
    opt.zero_grad();
    Tensor total;
    for (int b = 0; b < config.batch; ++b) {
      const auto& pair = pairs[size_t(rng.next_below(pairs.size()))];
      const double sigma = rng.uniform();
      Tensor loss;
      if (rng.uniform() < config.mask_dropout) {
        // refinement-stage augmentation: all-ones mask, fully known latent
        loss = cfm_loss(net, pair.q_gt, pair.q_gt, ones, pair.cond, sigma);
      } else {
        loss = cfm_loss(net, pair.q_gt, pair.q_comb, pair.m_s, pair.cond,
                        sigma);
      }
      total = total.defined() ? num::add(total, loss) : loss;
    }
    total = num::scale(total, 1.0 / double(config.batch));
    num::backward(total);
    opt.step();
    if (log && (it % config.log_every == 0 || it == config.iterations)) {
      std::ostringstream os;
      os << "inpaint iter " << it << " loss " << total.scalar();
      log(os.str());
    }
  }
}

}  // namespace p23d
