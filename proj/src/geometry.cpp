#include "p23d/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "p23d/error.hpp"

namespace p23d {

namespace {

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

std::array<double, 6> bounding_box(const std::vector<Vec3>& points) {
  const double inf = std::numeric_limits<double>::infinity();
  std::array<double, 6> bb = {inf, inf, inf, -inf, -inf, -inf};
  for (const auto& p : points) {
    bb[0] = std::min(bb[0], p.x);
    bb[1] = std::min(bb[1], p.y);
    bb[2] = std::min(bb[2], p.z);
    bb[3] = std::max(bb[3], p.x);
    bb[4] = std::max(bb[4], p.y);
    bb[5] = std::max(bb[5], p.z);
  }
  return bb;
}

}  // namespace

Vec3 Vec3::normalized() const {
  const double n = norm();
  if (n == 0.0) throw NumericError("normalizing zero vector");
  return *this * (1.0 / n);
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

bool Camera::rotation_orthonormal(double tol) const {
  const auto& r = rotation;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += r[k * 3 + i] * r[k * 3 + j];
      if (std::abs(acc - (i == j ? 1.0 : 0.0)) > tol) return false;
    }
  }
  return true;
}

Vec3 world_to_camera(const Vec3& p, const Camera& cam) {
  const Vec3 d = p - cam.center;
  const auto& r = cam.rotation;
  return {r[0] * d.x + r[1] * d.y + r[2] * d.z,
          r[3] * d.x + r[4] * d.y + r[5] * d.z,
          r[6] * d.x + r[7] * d.y + r[8] * d.z};
}

Vec3 camera_to_world(const Vec3& p, const Camera& cam) {
  const auto& r = cam.rotation;
  return Vec3{r[0] * p.x + r[3] * p.y + r[6] * p.z,
              r[1] * p.x + r[4] * p.y + r[7] * p.z,
              r[2] * p.x + r[5] * p.y + r[8] * p.z} +
         cam.center;
}

PixelProjection project(const Vec3& p_cam, const Camera& cam) {
  PixelProjection out;
  out.depth = p_cam.z;
  out.in_front = p_cam.z > 0.0;
  if (out.in_front) {
    out.x = cam.fx * p_cam.x / p_cam.z + cam.cx;
    out.y = cam.fy * p_cam.y / p_cam.z + cam.cy;
  }
  return out;
}

std::vector<Camera> make_view_ring(const ViewRingConfig& config) {
  if (config.n_views < 1) throw DataError("view ring: n_views must be >= 1");
  if (config.radius <= 0.0) throw DataError("view ring: radius must be > 0");
  const double pitch = config.pitch_deg * kPi / 180.0;
  std::vector<Camera> cams;
  cams.reserve(static_cast<size_t>(config.n_views));
  for (int i = 0; i < config.n_views; ++i) {
    const double yaw = 2.0 * kPi * double(i) / double(config.n_views);
    Camera cam;
    cam.width = config.width;
    cam.height = config.height;
    cam.fx = config.fx.value_or(double(config.width));
    cam.fy = config.fy.value_or(double(config.width));
    cam.cx = config.cx.value_or(0.5 * double(config.width));
    cam.cy = config.cy.value_or(0.5 * double(config.height));
    cam.center = config.look_at +
                 Vec3{config.radius * std::cos(pitch) * std::cos(yaw),
                      config.radius * std::cos(pitch) * std::sin(yaw),
                      config.radius * std::sin(pitch)};
    // Camera axes: z forward (toward look_at), x right, y down-ish; world
    // up is +z. Degenerate straight-down/up views fall back to +x as up.
    const Vec3 fwd = (config.look_at - cam.center).normalized();
    Vec3 up{0, 0, 1};
    if (std::abs(fwd.dot(up)) > 1.0 - 1e-9) up = Vec3{1, 0, 0};
    const Vec3 right = fwd.cross(up).normalized();
    const Vec3 down = fwd.cross(right).normalized();
    cam.rotation = {right.x, right.y, right.z, down.x, down.y,
                    down.z,  fwd.x,   fwd.y,   fwd.z};
    cams.push_back(cam);
  }
  return cams;
}

// --- loaders ----------------------------------------------------------------

GeometryFormat format_from_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == "obj") return GeometryFormat::kObj;
  if (ext == "ply") return GeometryFormat::kPly;
  if (ext == "xyz") return GeometryFormat::kXyz;
  throw UsageError("unrecognized geometry extension: " + path);
}

namespace {

struct PlyData {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

PlyData load_ply_impl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  std::string line;
  int lineno = 0;
  int n_vertices = -1, n_faces = 0;
  int vertex_props = 0;
  bool in_header = true;
  std::string current_element;
  if (!std::getline(is, line)) parse_fail(path, 1, "empty file");
  ++lineno;
  if (line.rfind("ply", 0) != 0) parse_fail(path, 1, "missing 'ply' magic");
  while (in_header) {
    if (!std::getline(is, line)) parse_fail(path, lineno, "unterminated header");
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string kind;
      ls >> kind;
      if (kind != "ascii") parse_fail(path, lineno, "only ascii PLY supported");
    } else if (tok == "element") {
      std::string name;
      int count;
      ls >> name >> count;
      current_element = name;
      if (name == "vertex") n_vertices = count;
      if (name == "face") n_faces = count;
    } else if (tok == "property") {
      if (current_element == "vertex") ++vertex_props;
    } else if (tok == "end_header") {
      in_header = false;
    }
  }
  if (n_vertices < 0) parse_fail(path, lineno, "no vertex element");
  PlyData out;
  out.vertices.reserve(static_cast<size_t>(n_vertices));
  for (int i = 0; i < n_vertices; ++i) {
    if (!std::getline(is, line)) {
      parse_fail(path, lineno + 1,
                 "vertex count mismatch: expected " +
                     std::to_string(n_vertices) + ", file ended after " +
                     std::to_string(i));
    }
    ++lineno;
    std::istringstream ls(line);
    Vec3 v;
    if (!(ls >> v.x >> v.y >> v.z)) parse_fail(path, lineno, "bad vertex line");
    // extra properties (normals etc.) ignored
    out.vertices.push_back(v);
  }
  for (int i = 0; i < n_faces; ++i) {
    if (!std::getline(is, line)) {
      parse_fail(path, lineno + 1, "face count mismatch");
    }
    ++lineno;
    std::istringstream ls(line);
    int n;
    if (!(ls >> n) || n < 3) parse_fail(path, lineno, "bad face line");
    std::vector<int> idx(static_cast<size_t>(n));
    for (auto& v : idx) {
      if (!(ls >> v)) parse_fail(path, lineno, "bad face index");
      if (v < 0 || v >= n_vertices)
        parse_fail(path, lineno, "face index out of range");
    }
    for (int j = 2; j < n; ++j) {
      out.faces.push_back({idx[0], idx[size_t(j - 1)], idx[size_t(j)]});
    }
  }
  return out;
}

}  // namespace

TriangleMesh load_mesh(const std::string& path, GeometryFormat format) {
  TriangleMesh mesh;
  if (format == GeometryFormat::kObj) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::istringstream ls(line);
      std::string tok;
      if (!(ls >> tok)) continue;
      if (tok == "v") {
        Vec3 v;
        if (!(ls >> v.x >> v.y >> v.z)) parse_fail(path, lineno, "bad vertex");
        mesh.vertices.push_back(v);
      } else if (tok == "f") {
        std::vector<int> idx;
        std::string ref;
        while (ls >> ref) {
          // "i", "i/t", "i/t/n", "i//n"; OBJ indices are 1-based and may be
          // negative (relative).
          const std::string first = ref.substr(0, ref.find('/'));
          int vi;
          try {
            vi = std::stoi(first);
          } catch (...) {
            parse_fail(path, lineno, "bad face reference '" + ref + "'");
          }
          if (vi < 0) vi = static_cast<int>(mesh.vertices.size()) + vi + 1;
          if (vi < 1 || vi > static_cast<int>(mesh.vertices.size()))
            parse_fail(path, lineno, "face index out of range");
          idx.push_back(vi - 1);
        }
        if (idx.size() < 3) parse_fail(path, lineno, "face with < 3 vertices");
        for (size_t j = 2; j < idx.size(); ++j) {
          mesh.triangles.push_back({idx[0], idx[j - 1], idx[j]});
        }
      }
    }
  } else if (format == GeometryFormat::kPly) {
    auto ply = load_ply_impl(path);
    mesh.vertices = std::move(ply.vertices);
    mesh.triangles = std::move(ply.faces);
  } else {
    throw UsageError("xyz files carry no faces; load as point cloud");
  }
  if (mesh.vertices.empty()) throw DataError("empty geometry: " + path);
  for (const auto& v : mesh.vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
      throw DataError("non-finite vertex in " + path);
  }
  return mesh;
}

PointCloud load_cloud(const std::string& path, GeometryFormat format) {
  PointCloud cloud;
  if (format == GeometryFormat::kXyz) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::istringstream ls(line);
      Vec3 v;
      if (ls >> v.x) {
        if (!(ls >> v.y >> v.z)) parse_fail(path, lineno, "incomplete triple");
        cloud.points.push_back(v);
      }
    }
  } else if (format == GeometryFormat::kPly) {
    auto ply = load_ply_impl(path);
    cloud.points = std::move(ply.vertices);
  } else {
    const auto mesh = load_mesh(path, format);
    cloud.points = mesh.vertices;
  }
  if (cloud.empty()) throw DataError("empty geometry: " + path);
  for (const auto& v : cloud.points) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
      throw DataError("non-finite point in " + path);
  }
  return cloud;
}

LoadedGeometry load_geometry(const std::string& path) {
  const auto format = format_from_path(path);
  LoadedGeometry out;
  if (format == GeometryFormat::kXyz) {
    out.cloud = load_cloud(path, format);
    return out;
  }
  if (format == GeometryFormat::kObj) {
    out.mesh = load_mesh(path, format);
    return out;
  }
  auto ply = load_ply_impl(path);
  if (!ply.faces.empty()) {
    TriangleMesh mesh;
    mesh.vertices = std::move(ply.vertices);
    mesh.triangles = std::move(ply.faces);
    out.mesh = std::move(mesh);
  } else {
    PointCloud cloud;
    cloud.points = std::move(ply.vertices);
    out.cloud = std::move(cloud);
  }
  return out;
}

void write_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "ply\nformat ascii 1.0\ncomment generated by p23d 1.0\n"
     << "element vertex " << cloud.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\nend_header\n";
  os.precision(9);
  for (const auto& p : cloud.points) {
    os << p.x << " " << p.y << " " << p.z << "\n";
  }
  if (!os) throw DataError("write failed: " + path);
}

// --- normalization ----------------------------------------------------------

NormalizeTransform normalize_unit_cube(std::vector<Vec3>& points) {
  if (points.empty()) throw DataError("normalize: empty geometry");
  const auto bb = bounding_box(points);
  const double ext = std::max({bb[3] - bb[0], bb[4] - bb[1], bb[5] - bb[2]});
  if (ext <= 0.0) throw DataError("normalize: zero-extent geometry");
  NormalizeTransform tf;
  tf.center = {0.5 * (bb[0] + bb[3]), 0.5 * (bb[1] + bb[4]),
               0.5 * (bb[2] + bb[5])};
  tf.scale = 1.0 / ext;
  for (auto& p : points) p = tf.apply(p);
  return tf;
}

NormalizeTransform normalize_unit_cube(TriangleMesh& mesh) {
  return normalize_unit_cube(mesh.vertices);
}

NormalizeTransform normalize_unit_cube(PointCloud& cloud) {
  return normalize_unit_cube(cloud.points);
}

// --- sampling ---------------------------------------------------------------

PointCloud sample_surface(const TriangleMesh& mesh, int64_t count, Rng& rng) {
  if (count < 1) throw DataError("sample_surface: count must be >= 1");
  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    total += triangle_area(mesh.vertices[size_t(t[0])],
                           mesh.vertices[size_t(t[1])],
                           mesh.vertices[size_t(t[2])]);
    cumulative.push_back(total);
  }
  if (total <= 0.0) {
    throw DataError("sample_surface: mesh has no non-degenerate triangle");
  }
  PointCloud cloud;
  cloud.points.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    const double u = rng.uniform() * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    const size_t ti = std::min(
        static_cast<size_t>(it - cumulative.begin()), cumulative.size() - 1);
    const auto& t = mesh.triangles[ti];
    // uniform barycentric via square-root trick
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    const Vec3& a = mesh.vertices[size_t(t[0])];
    const Vec3& b = mesh.vertices[size_t(t[1])];
    const Vec3& c = mesh.vertices[size_t(t[2])];
    cloud.points.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) +
                           c * (r1 * r2));
  }
  return cloud;
}

}  // namespace p23d
