#include "p23d/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "p23d/error.hpp"

namespace p23d {

DepthMap render_depth_mesh(const TriangleMesh& mesh, const Camera& cam) {
  DepthMap map(cam.width, cam.height);
  std::vector<Vec3> cam_pts(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    cam_pts[i] = world_to_camera(mesh.vertices[i], cam);
  }
  for (const auto& tri : mesh.triangles) {
    const Vec3& p0 = cam_pts[size_t(tri[0])];
    const Vec3& p1 = cam_pts[size_t(tri[1])];
    const Vec3& p2 = cam_pts[size_t(tri[2])];
    if (p0.z <= 1e-12 || p1.z <= 1e-12 || p2.z <= 1e-12) continue;
    const double x0 = cam.fx * p0.x / p0.z + cam.cx;
    const double y0 = cam.fy * p0.y / p0.z + cam.cy;
    const double x1 = cam.fx * p1.x / p1.z + cam.cx;
    const double y1 = cam.fy * p1.y / p1.z + cam.cy;
    const double x2 = cam.fx * p2.x / p2.z + cam.cx;
    const double y2 = cam.fy * p2.y / p2.z + cam.cy;
    const double area =
        (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (area == 0.0) continue;
    const int min_x = std::max(0, int(std::ceil(std::min({x0, x1, x2}))));
    const int max_x =
        std::min(cam.width - 1, int(std::floor(std::max({x0, x1, x2}))));
    const int min_y = std::max(0, int(std::ceil(std::min({y0, y1, y2}))));
    const int max_y =
        std::min(cam.height - 1, int(std::floor(std::max({y0, y1, y2}))));
    const double inv_area = 1.0 / area;
    const double iw0 = 1.0 / p0.z, iw1 = 1.0 / p1.z, iw2 = 1.0 / p2.z;
    for (int py = min_y; py <= max_y; ++py) {
      for (int px = min_x; px <= max_x; ++px) {
        const double dx = double(px), dy = double(py);
        // barycentric weights at the pixel center (integer coordinates)
        const double w0 =
            ((x1 - dx) * (y2 - dy) - (x2 - dx) * (y1 - dy)) * inv_area;
        const double w1 =
            ((x2 - dx) * (y0 - dy) - (x0 - dx) * (y2 - dy)) * inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double inv_depth = w0 * iw0 + w1 * iw1 + w2 * iw2;
        const double d = 1.0 / inv_depth;
        if (d < map.at(px, py)) map.at(px, py) = d;
      }
    }
  }
  return map;
}

DepthMap render_depth_points(const PointCloud& cloud, const Camera& cam,
                             int splat_px) {
  if (splat_px < 0) throw DataError("render_depth_points: splat_px must be >= 0");
  DepthMap map(cam.width, cam.height);
  for (const auto& p : cloud.points) {
    const auto proj = project(world_to_camera(p, cam), cam);
    if (!proj.in_front) continue;
    const int px = int(std::floor(proj.x + 0.5));
    const int py = int(std::floor(proj.y + 0.5));
    for (int dy = -splat_px; dy <= splat_px; ++dy) {
      for (int dx = -splat_px; dx <= splat_px; ++dx) {
        const int x = px + dx, y = py + dy;
        if (x < 0 || x >= cam.width || y < 0 || y >= cam.height) continue;
        if (proj.depth < map.at(x, y)) map.at(x, y) = proj.depth;
      }
    }
  }
  return map;
}

double compute_tau(const DepthMap& depth, double fraction) {
  double lo = DepthMap::kEmpty, hi = -DepthMap::kEmpty;
  for (double d : depth.depth) {
    if (std::isfinite(d)) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (!std::isfinite(lo)) throw DataError("compute_tau: all-empty depth map");
  return fraction * (hi - lo);
}

ObservationMask observation_mask(const PointCloud& cloud, const Camera& cam,
                                 const DepthMap& depth, double tau) {
  if (tau < 0.0) throw DataError("observation_mask: tau must be >= 0");
  ObservationMask mask(cloud.size(), 0);
  for (size_t i = 0; i < cloud.size(); ++i) {
    const auto proj = project(world_to_camera(cloud.points[i], cam), cam);
    if (!proj.in_front) continue;
    const int px = int(std::floor(proj.x + 0.5));
    const int py = int(std::floor(proj.y + 0.5));
    if (px < 0 || px >= depth.width || py < 0 || py >= depth.height) continue;
    const double d = depth.at(px, py);
    if (!std::isfinite(d)) continue;
    if (std::abs(d - proj.depth) < tau) mask[i] = 1;
  }
  return mask;
}

VisibleResult extract_visible(const PointCloud& cloud,
                              const ObservationMask& mask) {
  if (cloud.size() != mask.size()) {
    throw DataError("extract_visible: cloud/mask length mismatch");
  }
  VisibleResult out;
  for (size_t i = 0; i < cloud.size(); ++i) {
    if (mask[i]) out.cloud.points.push_back(cloud.points[i]);
  }
  out.empty_warning = out.cloud.empty();
  return out;
}

PointCloud union_visible(const std::vector<PointCloud>& views) {
  if (views.empty()) throw DataError("union_visible: no views");
  PointCloud out;
  for (const auto& v : views) {
    out.points.insert(out.points.end(), v.points.begin(), v.points.end());
  }
  if (out.empty()) throw DataError("union_visible: all views empty");
  return out;
}

void write_pfm(const DepthMap& depth, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  // Grayscale PFM, little-endian (negative scale), bottom-up row order.
  os << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      const double d = depth.at(x, y);
      const float f = std::isfinite(d) ? float(d) : 0.0f;
      os.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace p23d
