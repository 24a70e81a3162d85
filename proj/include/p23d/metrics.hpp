#pragma once

#include <string>
#include <vector>

#include "p23d/geometry.hpp"
#include "p23d/voxel.hpp"

namespace p23d {

enum class ChamferMode { kMean, kSum };

// Symmetric Chamfer distance from exact nearest neighbors (grid-bucketed
// search, no approximation). Default: mean of the two directed means over
// non-squared Euclidean distances; `squared` switches both directions to
// squared distances.
double chamfer(const PointCloud& p, const PointCloud& q,
               ChamferMode mode = ChamferMode::kMean, bool squared = false);

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// precision = fraction of P within `threshold` (inclusive) of Q; recall the
// converse; F = 2PR/(P+R), 0 when P+R = 0.
FScore fscore(const PointCloud& p, const PointCloud& q, double threshold);

// Exact nearest-neighbor distances from each point of `from` to `to`
// (shared by chamfer/fscore; exposed for oracle comparison in tests).
std::vector<double> nearest_distances(const PointCloud& from,
                                      const PointCloud& to);

struct EvalRecord {
  std::string id;
  double cd = 0.0;
  double f = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
  double visible_cd = 0.0;
  double visible_f = 0.0;
  int64_t gen_points = 0;
  int64_t gt_points = 0;
  uint64_t seed = 0;
};

// Overall metrics on voxel centers plus visible-region-restricted variants:
// both clouds are restricted to voxels whose latent-mask cell (downsample of
// the prior to resolution r) is set.
EvalRecord visible_region_eval(const OccupancyGrid& gen,
                               const OccupancyGrid& gt,
                               const OccupancyGrid& prior, int r,
                               double threshold);

enum class ReportFormat { kCsv, kJsonl };

// Deterministic column order, aggregate-mean row last; re-emission is
// byte-identical.
void emit_report(const std::vector<EvalRecord>& records,
                 const std::string& path, ReportFormat format);

}  // namespace p23d
