#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>

#include "p23d/geometry.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("p23d_test_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string write_file(const std::filesystem::path& path,
                              const std::string& content) {
  std::ofstream os(path);
  os << content;
  return path.string();
}

// Moller-Trumbore ray/triangle intersection; returns distance along the
// (unit) direction, or nullopt on miss.
inline std::optional<double> ray_triangle(const p23d::Vec3& origin,
                                          const p23d::Vec3& dir,
                                          const p23d::Vec3& a,
                                          const p23d::Vec3& b,
                                          const p23d::Vec3& c) {
  const p23d::Vec3 e1 = b - a;
  const p23d::Vec3 e2 = c - a;
  const p23d::Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const p23d::Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const p23d::Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t <= 1e-12) return std::nullopt;
  return t;
}

// Nearest surface hit along a ray, over all triangles.
inline std::optional<double> ray_mesh(const p23d::Vec3& origin,
                                      const p23d::Vec3& dir,
                                      const p23d::TriangleMesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles) {
    const auto hit = ray_triangle(origin, dir, mesh.vertices[size_t(tri[0])],
                                  mesh.vertices[size_t(tri[1])],
                                  mesh.vertices[size_t(tri[2])]);
    if (hit && *hit < best) best = *hit;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

inline p23d::TriangleMesh make_quad(const p23d::Vec3& a, const p23d::Vec3& b,
                                    const p23d::Vec3& c, const p23d::Vec3& d) {
  p23d::TriangleMesh mesh;
  mesh.vertices = {a, b, c, d};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

}  // namespace testutil
