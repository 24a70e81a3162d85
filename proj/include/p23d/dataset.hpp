#pragma once

#include <string>
#include <vector>

#include "p23d/latent.hpp"
#include "p23d/visibility.hpp"

namespace p23d {

struct TrainingPair {
  num::Tensor q_comb;     // {c_s, r, r, r}
  num::Tensor m_s;        // {1, r, r, r}, binary
  std::vector<double> cond;
  num::Tensor q_gt;       // {c_s, r, r, r}
  std::string asset_id;
  int view = 0;
};

struct BuildPairsResult {
  std::vector<TrainingPair> pairs;
  int skipped_views = 0;  // views with zero visible points
};

// Per-view training data: render depth, mask the shared surface sample by
// depth consistency, voxelize the visible cloud, encode, mix with noise and
// derive the latent mask. Surface points are sampled once per asset and
// shared across views.
BuildPairsResult build_pairs(const TriangleMesh& mesh, const VaeParams& vae,
                             const std::vector<Camera>& cameras,
                             int64_t sample_count, double tau_fraction,
                             const std::vector<double>& cond,
                             const std::string& asset_id, Rng& rng);

enum class ShapeFamily { kBox, kSphere, kUnion, kLShape, kMixed };

ShapeFamily shape_family_from_name(const std::string& name);

struct SyntheticShape {
  TriangleMesh mesh;  // normalized to [-0.5, 0.5]^3
  std::vector<double> cond;
  std::string id;
};

// Watertight parametric meshes; generation parameters are recorded in the
// condition vector (family one-hot + normalized size parameters).
std::vector<SyntheticShape> gen_synthetic_shapes(int count, ShapeFamily family,
                                                 int cond_dim, Rng& rng);

// Line-delimited manifest: one "pair <asset> <view> <file>" record per
// serialized pair plus a header carrying the config hash.
struct Manifest {
  uint32_t config_hash = 0;
  struct Entry {
    std::string asset_id;
    int view = 0;
    std::string file;
  };
  std::vector<Entry> entries;
};

void write_manifest(const Manifest& manifest, const std::string& path);
Manifest read_manifest(const std::string& path);

// Pair tensors in the "P23D" tensor format.
void save_pair(const TrainingPair& pair, const std::string& path);
TrainingPair load_pair(const std::string& path);

// Writes all pairs plus the manifest into `dir`; returns the manifest path.
std::string save_pair_set(const std::vector<TrainingPair>& pairs,
                          const std::string& dir, uint32_t config_hash);
// Loads every pair referenced by a manifest, validating the config hash.
std::vector<TrainingPair> load_pair_set(const std::string& manifest_path,
                                        uint32_t expected_hash);

}  // namespace p23d
