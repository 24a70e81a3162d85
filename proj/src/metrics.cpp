#include "p23d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "p23d/error.hpp"

namespace p23d {

namespace {

// Uniform bucket grid over the target cloud for exact nearest-neighbor
// queries. Shells are expanded until the conservative bound
// ((s-1)*cell)^2 exceeds the best squared distance found.
class BucketGrid {
 public:
  explicit BucketGrid(const PointCloud& cloud) : cloud_(cloud) {
    double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
    for (const auto& p : cloud.points) {
      const double c[3] = {p.x, p.y, p.z};
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], c[a]);
        hi[a] = std::max(hi[a], c[a]);
      }
    }
    const double ext =
        std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], 1e-12});
    const int target_res = std::max(
        1, int(std::floor(std::cbrt(double(cloud.size())))));
    res_ = std::min(64, target_res);
    cell_ = ext / res_;
    for (int a = 0; a < 3; ++a) origin_[a] = lo[a];
    buckets_.assign(size_t(res_) * res_ * res_, {});
    for (size_t i = 0; i < cloud.size(); ++i) {
      buckets_[cell_index(cloud.points[i])].push_back(i);
    }
  }

  double nearest_sq(const Vec3& p) const {
    const int ci = coord(p.x, 0), cj = coord(p.y, 1), ck = coord(p.z, 2);
    double best = 1e300;
    const int max_shell = 2 * res_ + 2;
    for (int s = 0; s <= max_shell; ++s) {
      const double bound = double(s - 1) * cell_;
      if (s > 1 && bound * bound > best) break;
      scan_shell(ci, cj, ck, s, p, best);
    }
    return best;
  }

 private:
  int coord(double v, int axis) const {
    int c = int(std::floor((v - origin_[axis]) / cell_));
    return std::clamp(c, 0, res_ - 1);
  }
  size_t cell_index(const Vec3& p) const {
    return (size_t(coord(p.x, 0)) * res_ + size_t(coord(p.y, 1))) * res_ +
           size_t(coord(p.z, 2));
  }
  void scan_cell(int i, int j, int k, const Vec3& p, double& best) const {
    if (i < 0 || i >= res_ || j < 0 || j >= res_ || k < 0 || k >= res_) return;
    const auto& bucket = buckets_[(size_t(i) * res_ + size_t(j)) * res_ +
                                  size_t(k)];
    for (size_t idx : bucket) {
      const Vec3& q = cloud_.points[idx];
      const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best) best = d2;
    }
  }
  void scan_shell(int ci, int cj, int ck, int s, const Vec3& p,
                  double& best) const {
    if (s == 0) {
      scan_cell(ci, cj, ck, p, best);
      return;
    }
    for (int di = -s; di <= s; ++di) {
      for (int dj = -s; dj <= s; ++dj) {
        for (int dk = -s; dk <= s; ++dk) {
          if (std::max({std::abs(di), std::abs(dj), std::abs(dk)}) != s)
            continue;
          scan_cell(ci + di, cj + dj, ck + dk, p, best);
        }
      }
    }
  }

  const PointCloud& cloud_;
  int res_ = 1;
  double cell_ = 1.0;
  double origin_[3] = {0, 0, 0};
  std::vector<std::vector<size_t>> buckets_;
};

}  // namespace

std::vector<double> nearest_distances(const PointCloud& from,
                                      const PointCloud& to) {
  if (from.empty() || to.empty()) {
    throw DataError("nearest_distances: empty point cloud");
  }
  BucketGrid grid(to);
  std::vector<double> out(from.size());
  for (size_t i = 0; i < from.size(); ++i) {
    out[i] = std::sqrt(grid.nearest_sq(from.points[i]));
  }
  return out;
}

double chamfer(const PointCloud& p, const PointCloud& q, ChamferMode mode,
               bool squared) {
  const auto d_pq = nearest_distances(p, q);
  const auto d_qp = nearest_distances(q, p);
  double sum_pq = 0.0, sum_qp = 0.0;
  for (double d : d_pq) sum_pq += squared ? d * d : d;
  for (double d : d_qp) sum_qp += squared ? d * d : d;
  const double mean_pq = sum_pq / double(d_pq.size());
  const double mean_qp = sum_qp / double(d_qp.size());
  return mode == ChamferMode::kMean ? 0.5 * (mean_pq + mean_qp)
                                    : mean_pq + mean_qp;
}

FScore fscore(const PointCloud& p, const PointCloud& q, double threshold) {
  if (threshold <= 0.0) throw DataError("fscore: threshold must be > 0");
  const auto d_pq = nearest_distances(p, q);
  const auto d_qp = nearest_distances(q, p);
  int64_t hit_p = 0, hit_q = 0;
  for (double d : d_pq) {
    if (d <= threshold) ++hit_p;
  }
  for (double d : d_qp) {
    if (d <= threshold) ++hit_q;
  }
  FScore out;
  out.precision = double(hit_p) / double(d_pq.size());
  out.recall = double(hit_q) / double(d_qp.size());
  const double pr = out.precision + out.recall;
  out.f = pr == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / pr;
  return out;
}

EvalRecord visible_region_eval(const OccupancyGrid& gen,
                               const OccupancyGrid& gt,
                               const OccupancyGrid& prior, int r,
                               double threshold) {
  if (gen.n() != gt.n() || gen.n() != prior.n()) {
    throw DataError("visible_region_eval: resolution mismatch");
  }
  if (prior.empty()) {
    throw DataError("visible_region_eval: empty prior");
  }
  EvalRecord rec;
  const PointCloud gen_pts = voxel_centers(gen);
  const PointCloud gt_pts = voxel_centers(gt);
  rec.cd = chamfer(gen_pts, gt_pts);
  const FScore overall = fscore(gen_pts, gt_pts, threshold);
  rec.f = overall.f;
  rec.precision = overall.precision;
  rec.recall = overall.recall;
  rec.iou = grid_iou(gen, gt);
  rec.gen_points = int64_t(gen_pts.size());
  rec.gt_points = int64_t(gt_pts.size());

  const OccupancyGrid mask = downsample_mask(prior, r);
  const int f = gen.n() / r;
  auto restrict = [&](const OccupancyGrid& g) {
    OccupancyGrid out(g.n());
    for (const auto& c : sparse_coords(g)) {
      if (mask.get(c[0] / f, c[1] / f, c[2] / f)) out.set(c[0], c[1], c[2]);
    }
    return out;
  };
  const OccupancyGrid gen_vis = restrict(gen);
  const OccupancyGrid gt_vis = restrict(gt);
  if (gen_vis.empty() || gt_vis.empty()) {
    // nothing to compare inside the visible region; report worst case
    rec.visible_cd = std::numeric_limits<double>::infinity();
    rec.visible_f = 0.0;
    return rec;
  }
  const PointCloud gen_v = voxel_centers(gen_vis);
  const PointCloud gt_v = voxel_centers(gt_vis);
  rec.visible_cd = chamfer(gen_v, gt_v);
  rec.visible_f = fscore(gen_v, gt_v, threshold).f;
  return rec;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_record_csv(std::ostream& os, const EvalRecord& r) {
  os << r.id << "," << fmt_double(r.cd) << "," << fmt_double(r.f) << ","
     << fmt_double(r.precision) << "," << fmt_double(r.recall) << ","
     << fmt_double(r.iou) << "," << fmt_double(r.visible_cd) << ","
     << fmt_double(r.visible_f) << "," << r.gen_points << "," << r.gt_points
     << "," << r.seed << "\n";
}

void write_record_jsonl(std::ostream& os, const EvalRecord& r) {
  os << "{\"id\":\"" << r.id << "\",\"cd\":" << fmt_double(r.cd)
     << ",\"f\":" << fmt_double(r.f)
     << ",\"precision\":" << fmt_double(r.precision)
     << ",\"recall\":" << fmt_double(r.recall)
     << ",\"iou\":" << fmt_double(r.iou)
     << ",\"visible_cd\":" << fmt_double(r.visible_cd)
     << ",\"visible_f\":" << fmt_double(r.visible_f)
     << ",\"gen_points\":" << r.gen_points << ",\"gt_points\":" << r.gt_points
     << ",\"seed\":" << r.seed << "}\n";
}

}  // namespace

void emit_report(const std::vector<EvalRecord>& records,
                 const std::string& path, ReportFormat format) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  EvalRecord agg;
  agg.id = "mean";
  for (const auto& r : records) {
    agg.cd += r.cd;
    agg.f += r.f;
    agg.precision += r.precision;
    agg.recall += r.recall;
    agg.iou += r.iou;
    agg.visible_cd += r.visible_cd;
    agg.visible_f += r.visible_f;
    agg.gen_points += r.gen_points;
    agg.gt_points += r.gt_points;
  }
  if (!records.empty()) {
    const double inv = 1.0 / double(records.size());
    agg.cd *= inv;
    agg.f *= inv;
    agg.precision *= inv;
    agg.recall *= inv;
    agg.iou *= inv;
    agg.visible_cd *= inv;
    agg.visible_f *= inv;
  }
  if (format == ReportFormat::kCsv) {
    os << "id,cd,f,precision,recall,iou,visible_cd,visible_f,gen_points,"
          "gt_points,seed\n";
    for (const auto& r : records) write_record_csv(os, r);
    write_record_csv(os, agg);
  } else {
    for (const auto& r : records) write_record_jsonl(os, r);
    write_record_jsonl(os, agg);
  }
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace p23d
