#pragma once

#include <cstdint>
#include <string>

namespace p23d {

// Shared run configuration: plain key=value file, CLI flags override.
// Defaults follow the published constants where stated (t=50, s=25,
// tau fraction 0.05, F-score threshold 0.05, ring radius 1.8, pitch 30,
// 24 training views, S=50000).
struct Config {
  // resolutions / channels
  int n = 16;
  int r = 4;
  int c_s = 4;
  int c_m = 1;
  // network
  int vae_hidden = 8;
  int width = 32;
  int blocks = 4;
  int time_embed = 16;
  int cond_dim = 16;
  // training
  double lr = 1e-3;
  int batch = 16;
  int iterations = 5000;
  double vae_lr = 1e-3;
  int vae_batch = 8;
  int vae_iterations = 4000;
  double vae_target_iou = 0.95;
  double beta = 1e-4;
  int variational = 0;
  uint64_t seed = 0;
  double mask_dropout = 0.1;
  // sampling
  int steps = 50;
  int inpaint_steps = 25;
  int repair_k = 5;
  double repair_strength = 0.3;
  double decode_threshold = 0.5;
  int reanchor = 0;
  // visibility / dataset
  double tau_fraction = 0.05;
  int train_views = 24;
  int image_size = 64;
  int64_t surface_samples = 50000;
  // camera ring (evaluation default)
  int ring_views = 8;
  double ring_pitch = 30.0;
  double ring_radius = 1.8;
  // metrics
  double fscore_threshold = 0.05;
  std::string chamfer_mode = "mean";  // mean | sum
  int chamfer_squared = 0;
  // execution
  int threads = 1;

  void validate() const;

  // FNV-1a over the keys that determine model/dataset compatibility
  // (resolutions, channels, network sizes, dataset construction knobs).
  uint32_t model_hash() const;

  // Canonical key=value dump (sorted keys), used for --print-config.
  std::string to_string() const;
};

// Parses a key=value file ('#' comments, blank lines allowed). Unknown keys
// are rejected. Missing file throws unless `optional`.
Config load_config(const std::string& path, Config base = {});
void apply_key_value(Config& config, const std::string& key,
                     const std::string& value);

uint32_t fnv1a(const std::string& text);

}  // namespace p23d
