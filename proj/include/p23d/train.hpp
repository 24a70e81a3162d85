#pragma once

#include <functional>
#include <vector>

#include "p23d/dataset.hpp"
#include "p23d/latent.hpp"

namespace p23d {

using LogFn = std::function<void(const std::string&)>;

struct VaeTrainConfig {
  double lr = 1e-3;
  int batch = 8;
  int iterations = 4000;
  double target_iou = 0.95;  // early stop once the train set reaches this
  double beta = 1e-4;
  int eval_every = 250;
  bool variational = false;
};

struct VaeTrainResult {
  double train_iou = 0.0;
  int iterations_run = 0;
};

// Trains the occupancy autoencoder on the given grids; mutates `vae`.
VaeTrainResult train_vae(VaeParams& vae, const std::vector<OccupancyGrid>& grids,
                         const VaeTrainConfig& config, Rng& rng,
                         const LogFn& log = nullptr);

double mean_reconstruction_iou(const VaeParams& vae,
                               const std::vector<OccupancyGrid>& grids,
                               double threshold = 0.5);

struct InpaintTrainConfig {
  double lr = 1e-3;
  int batch = 16;
  int iterations = 5000;
  double mask_dropout = 0.1;  // all-ones mask + q_comb = q_gt samples
  int log_every = 500;
};

// Trains the inpainting network on prebuilt pairs; mutates `net`.
void train_inpaint(InpaintNet& net, const std::vector<TrainingPair>& pairs,
                   const InpaintTrainConfig& config, Rng& rng,
                   const LogFn& log = nullptr);

}  // namespace p23d
