#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "p23d/geometry.hpp"

namespace p23d {

// Bit-packed N^3 binary occupancy over the fixed cube [-0.5, 0.5]^3.
// Index order is x-major: bit index = (i*N + j)*N + k for voxel (i, j, k)
// with i along x.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(int n);

  int n() const { return n_; }
  bool get(int i, int j, int k) const {
    const int64_t b = bit_index(i, j, k);
    return (bits_[size_t(b >> 6)] >> (b & 63)) & 1u;
  }
  void set(int i, int j, int k, bool value = true) {
    const int64_t b = bit_index(i, j, k);
    if (value)
      bits_[size_t(b >> 6)] |= (uint64_t{1} << (b & 63));
    else
      bits_[size_t(b >> 6)] &= ~(uint64_t{1} << (b & 63));
  }
  int64_t count() const;
  bool empty() const { return count() == 0; }
  const std::vector<uint64_t>& bits() const { return bits_; }

  std::array<float, 6> source_bbox{-0.5f, -0.5f, -0.5f, 0.5f, 0.5f, 0.5f};

 private:
  int64_t bit_index(int i, int j, int k) const {
    return (int64_t(i) * n_ + j) * n_ + k;
  }
  int n_ = 0;
  std::vector<uint64_t> bits_;
};

struct VoxelizeResult {
  OccupancyGrid grid;
  int64_t clamped_points = 0;  // out-of-range points clamped into the cube
};

// Voxel index per axis: floor((coord + 0.5) * n), clamped to [0, n-1].
VoxelizeResult voxelize(const PointCloud& cloud, int n);

// Latent-resolution mask: cell set iff any voxel in its (n/r)^3 block is
// occupied (any-rule).
OccupancyGrid downsample_mask(const OccupancyGrid& grid, int r);

// Sorted lexicographic (i, j, k) triples of occupied voxels.
std::vector<std::array<int, 3>> sparse_coords(const OccupancyGrid& grid);

// Center of voxel (i,j,k): ((i+0.5)/n - 0.5, ...) per axis.
PointCloud voxel_centers(const OccupancyGrid& grid);

// |a AND b| / |a OR b|; 1.0 when both grids are empty.
double grid_iou(const OccupancyGrid& a, const OccupancyGrid& b);

// "VOXG" file: magic, u32 version, u32 n, bit-packed little-endian
// occupancy, then 6 float32 source-bounding-box values.
void save_voxg(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid load_voxg(const std::string& path);

}  // namespace p23d
