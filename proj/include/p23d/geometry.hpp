#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "p23d/rng.hpp"

namespace p23d {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const;
};

struct PointCloud {
  std::vector<Vec3> points;

  bool empty() const { return points.empty(); }
  size_t size() const { return points.size(); }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Pinhole camera. World-to-camera: p_cam = R * (p - t), with t the camera
// center in world coordinates. Camera looks down +z (depth w > 0 is in
// front); right-handed world with +z up.
struct Camera {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  Vec3 center;
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  bool rotation_orthonormal(double tol = 1e-9) const;
};

Vec3 world_to_camera(const Vec3& p, const Camera& cam);
// Inverse rigid map (used by ray casting): p_world = R^T * p_cam + t.
Vec3 camera_to_world(const Vec3& p_cam, const Camera& cam);

struct PixelProjection {
  double x = 0.0, y = 0.0;  // pixel coordinates
  double depth = 0.0;       // camera-axis depth w
  bool in_front = false;    // w > 0; x/y undefined otherwise
};

PixelProjection project(const Vec3& p_cam, const Camera& cam);

// Cameras on a ring: equal yaw increments, fixed pitch above the horizontal
// plane, all looking at `look_at`. Defaults follow the evaluation protocol
// (8 views, pitch 30 deg, radius 1.8); dataset rendering uses 24 views.
// Intrinsics default: fx = fy = width, principal point at the image center.
struct ViewRingConfig {
  int n_views = 8;
  double pitch_deg = 30.0;
  double radius = 1.8;
  Vec3 look_at{0, 0, 0};
  int width = 64;
  int height = 64;
  std::optional<double> fx, fy, cx, cy;
};

std::vector<Camera> make_view_ring(const ViewRingConfig& config);

// --- ingestion / normalization ---------------------------------------------

enum class GeometryFormat { kObj, kPly, kXyz };

GeometryFormat format_from_path(const std::string& path);

// OBJ: v/f records only. PLY: ASCII, vertex x y z (and faces when present).
// XYZ: whitespace-separated coordinate triples.
TriangleMesh load_mesh(const std::string& path, GeometryFormat format);
PointCloud load_cloud(const std::string& path, GeometryFormat format);

struct LoadedGeometry {
  std::optional<TriangleMesh> mesh;
  std::optional<PointCloud> cloud;
};
LoadedGeometry load_geometry(const std::string& path);

void write_ply(const PointCloud& cloud, const std::string& path);

// p' = (p - center) * scale
struct NormalizeTransform {
  Vec3 center;
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
  Vec3 invert(const Vec3& p) const { return p * (1.0 / scale) + center; }
};

// Centers the bounding box at the origin and scales uniformly so the
// longest extent equals 1 (coordinates in [-0.5, 0.5]).
NormalizeTransform normalize_unit_cube(std::vector<Vec3>& points);
NormalizeTransform normalize_unit_cube(TriangleMesh& mesh);
NormalizeTransform normalize_unit_cube(PointCloud& cloud);

// Area-weighted surface sampling, uniform within each triangle.
PointCloud sample_surface(const TriangleMesh& mesh, int64_t count, Rng& rng);

}  // namespace p23d
