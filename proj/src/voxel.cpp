#include "p23d/voxel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "p23d/error.hpp"

namespace p23d {

OccupancyGrid::OccupancyGrid(int n) : n_(n) {
  if (n < 2) throw DataError("occupancy grid: resolution must be >= 2");
  const int64_t total = int64_t(n) * n * n;
  bits_.assign(size_t((total + 63) / 64), 0);
}

int64_t OccupancyGrid::count() const {
  int64_t c = 0;
  for (uint64_t w : bits_) c += std::popcount(w);
  return c;
}

VoxelizeResult voxelize(const PointCloud& cloud, int n) {
  if (cloud.empty()) throw DataError("voxelize: empty cloud");
  VoxelizeResult out;
  out.grid = OccupancyGrid(n);
  double lo[3] = {1e30, 1e30, 1e30}, hi[3] = {-1e30, -1e30, -1e30};
  for (const auto& p : cloud.points) {
    const double c[3] = {p.x, p.y, p.z};
    int idx[3];
    bool clamped = false;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
      int v = int(std::floor((c[a] + 0.5) * n));
      if (v < 0) {
        v = 0;
        clamped = true;
      } else if (v >= n) {
        // exact +0.5 boundary lands here and is clamped silently
        if (c[a] > 0.5) clamped = true;
        v = n - 1;
      }
      idx[a] = v;
    }
    if (clamped) ++out.clamped_points;
    out.grid.set(idx[0], idx[1], idx[2]);
  }
  for (int a = 0; a < 3; ++a) {
    out.grid.source_bbox[size_t(a)] = float(lo[a]);
    out.grid.source_bbox[size_t(a + 3)] = float(hi[a]);
  }
  return out;
}

OccupancyGrid downsample_mask(const OccupancyGrid& grid, int r) {
  const int n = grid.n();
  if (r < 2 || n % r != 0) {
    throw DataError("downsample_mask: resolution " + std::to_string(n) +
                    " not divisible by " + std::to_string(r));
  }
  const int f = n / r;
  OccupancyGrid mask(r);
  mask.source_bbox = grid.source_bbox;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (grid.get(i, j, k)) mask.set(i / f, j / f, k / f);
      }
    }
  }
  return mask;
}

std::vector<std::array<int, 3>> sparse_coords(const OccupancyGrid& grid) {
  std::vector<std::array<int, 3>> out;
  const int n = grid.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (grid.get(i, j, k)) out.push_back({i, j, k});
  return out;
}

PointCloud voxel_centers(const OccupancyGrid& grid) {
  if (grid.empty()) throw DataError("voxel_centers: empty grid");
  PointCloud cloud;
  const double inv = 1.0 / grid.n();
  for (const auto& c : sparse_coords(grid)) {
    cloud.points.push_back({(c[0] + 0.5) * inv - 0.5, (c[1] + 0.5) * inv - 0.5,
                            (c[2] + 0.5) * inv - 0.5});
  }
  return cloud;
}

double grid_iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (a.n() != b.n()) throw DataError("grid_iou: resolution mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t w = 0; w < a.bits().size(); ++w) {
    inter += std::popcount(a.bits()[w] & b.bits()[w]);
    uni += std::popcount(a.bits()[w] | b.bits()[w]);
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

namespace {

constexpr char kMagic[4] = {'V', 'O', 'X', 'G'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("truncated VOXG file: " + path);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

}  // namespace

void save_voxg(const OccupancyGrid& grid, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, uint32_t(grid.n()));
  for (uint64_t w : grid.bits()) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(w >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  for (float f : grid.source_bbox) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(os, bits);
  }
  if (!os) throw DataError("write failed: " + path);
}

OccupancyGrid load_voxg(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("bad VOXG magic: " + path);
  }
  if (read_u32(is, path) != kVersion) {
    throw DataError("unsupported VOXG version in " + path);
  }
  const int n = int(read_u32(is, path));
  OccupancyGrid grid(n);
  std::vector<uint64_t> words(grid.bits().size());
  for (auto& w : words) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw DataError("truncated VOXG file: " + path);
    w = 0;
    for (int i = 0; i < 8; ++i) w |= uint64_t(b[i]) << (8 * i);
  }
  // rebuild via set() to keep the packing private
  int64_t bit = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k, ++bit)
        if ((words[size_t(bit >> 6)] >> (bit & 63)) & 1u) grid.set(i, j, k);
  for (auto& f : grid.source_bbox) {
    const uint32_t bits = read_u32(is, path);
    std::memcpy(&f, &bits, 4);
  }
  return grid;
}

}  // namespace p23d
