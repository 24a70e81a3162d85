#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "p23d/geometry.hpp"

namespace p23d {

// Camera-axis depth per pixel; empty pixels carry +inf.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> depth;

  static constexpr double kEmpty = std::numeric_limits<double>::infinity();

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h) {
    depth.assign(static_cast<size_t>(w) * h, kEmpty);
  }
  double at(int x, int y) const {
    return depth[static_cast<size_t>(y) * width + x];
  }
  double& at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
  bool occupied(int x, int y) const { return std::isfinite(at(x, y)); }
};

using ObservationMask = std::vector<uint8_t>;

// Z-buffered triangle rasterization with perspective-correct depth
// interpolation; no face culling. Triangles with a vertex at or behind the
// camera are skipped (no clipping at this scale).
DepthMap render_depth_mesh(const TriangleMesh& mesh, const Camera& cam);

// Point-splat fallback for sensor-only inputs: each point covers a
// (2*splat_px+1)^2 pixel square, minimum depth per pixel.
DepthMap render_depth_points(const PointCloud& cloud, const Camera& cam,
                             int splat_px);

// tau = fraction * (max depth - min depth) over non-empty pixels.
double compute_tau(const DepthMap& depth, double fraction = 0.05);

// Point i is visible iff it is in front of the camera, its nearest pixel
// (floor(x+0.5), floor(y+0.5)) lies inside the image and is non-empty, and
// |D(u_i) - w_i| < tau (strict).
ObservationMask observation_mask(const PointCloud& cloud, const Camera& cam,
                                 const DepthMap& depth, double tau);

struct VisibleResult {
  PointCloud cloud;
  bool empty_warning = false;
};
VisibleResult extract_visible(const PointCloud& cloud,
                              const ObservationMask& mask);

// Concatenation of per-view visible clouds; duplicates are kept
// (voxelization absorbs them).
PointCloud union_visible(const std::vector<PointCloud>& views);

// Portable float map export for debugging; empty pixels are written as 0.
void write_pfm(const DepthMap& depth, const std::string& path);

}  // namespace p23d
