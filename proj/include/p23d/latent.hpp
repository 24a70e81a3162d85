#pragma once

#include <string>
#include <vector>

#include "p23d/checkpoint.hpp"
#include "p23d/tensor.hpp"
#include "p23d/voxel.hpp"

namespace p23d {

// Latents are dense channel-first tensors {c, r, r, r}; spatial index order
// matches OccupancyGrid (x-major).

struct LatentConfig {
  int n = 16;        // occupancy resolution
  int r = 4;         // latent resolution (n divisible by r)
  int c_s = 4;       // latent channels
  int c_m = 1;       // mask channels
  int vae_hidden = 8;
  int width = 32;    // inpainting network width
  int blocks = 4;    // residual blocks
  int time_embed = 16;
  int cond_dim = 16;

  int stages() const;  // log2(n / r)
  void validate() const;
};

// Occupancy autoencoder standing in for the sparse-structure VAE pair.
// Deterministic encoder with a norm regularizer by default; Gaussian
// reparameterization + KL available behind `variational`.
struct VaeParams {
  LatentConfig config;
  NamedTensors params;  // trainable, requires_grad

  static VaeParams init(const LatentConfig& config, Rng& rng);
  std::vector<num::Tensor> trainable() const;
};

struct InpaintNet {
  LatentConfig config;
  NamedTensors params;

  static InpaintNet init(const LatentConfig& config, Rng& rng);
  std::vector<num::Tensor> trainable() const;
};

// Grid <-> tensor bridges.
num::Tensor grid_to_tensor(const OccupancyGrid& grid);        // {1,n,n,n}
num::Tensor mask_to_tensor(const OccupancyGrid& latent_mask); // {1,r,r,r}

num::Tensor encode_ss(const OccupancyGrid& grid, const VaeParams& vae);
num::Tensor decode_probs(const num::Tensor& latent, const VaeParams& vae);
OccupancyGrid decode_ss(const num::Tensor& latent, const VaeParams& vae,
                        double threshold = 0.5);

// Mean BCE between decoded probabilities and occupancy plus
// beta * ||q||^2. With `variational`, the latent is sampled as
// q = mu + exp(logvar/2) * eps (trainable per-channel logvar) and the
// regularizer becomes beta * KL against the standard normal.
num::Tensor vae_loss(const OccupancyGrid& grid, const VaeParams& vae,
                     double beta = 1e-4, bool variational = false,
                     Rng* rng = nullptr);

// q_comb = m ⊙ q_vis + (1 - m) ⊙ eps, mask broadcast over channels.
num::Tensor mix_latent(const num::Tensor& q_vis, const num::Tensor& m,
                       const num::Tensor& eps);

// Channel concatenation, latent channels first, mask channels last.
num::Tensor concat_mask(const num::Tensor& q, const num::Tensor& m);

// x_sigma = (1 - sigma) * q_gt + sigma * q_comb.
num::Tensor bridge_state(const num::Tensor& q_gt, const num::Tensor& q_comb,
                         double sigma);

// Velocity prediction of shape {c_s, r, r, r}.
num::Tensor inpaint_forward(const InpaintNet& net, const num::Tensor& x_inp,
                            double sigma, const std::vector<double>& cond);

// mean || G(concat(bridge(q_gt, q_comb, sigma), m), sigma, cond)
//         - (q_comb - q_gt) ||^2
num::Tensor cfm_loss(const InpaintNet& net, const num::Tensor& q_gt,
                     const num::Tensor& q_comb, const num::Tensor& m,
                     const std::vector<double>& cond, double sigma);

std::vector<double> zero_condition(const LatentConfig& config);

// Checkpoint helpers: parameters plus "meta/..." header entries recording
// resolutions, widths, the RNG algorithm id, and the config hash.
void save_vae(const VaeParams& vae, const std::string& path,
              uint32_t config_hash);
VaeParams load_vae(const std::string& path);
void save_inpaint(const InpaintNet& net, const std::string& path,
                  uint32_t config_hash);
InpaintNet load_inpaint(const std::string& path);
uint32_t checkpoint_config_hash(const std::string& path);

}  // namespace p23d
