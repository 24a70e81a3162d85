#include "p23d/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "p23d/error.hpp"

namespace p23d {

using num::Tensor;

BuildPairsResult build_pairs(const TriangleMesh& mesh, const VaeParams& vae,
                             const std::vector<Camera>& cameras,
                             int64_t sample_count, double tau_fraction,
                             const std::vector<double>& cond,
                             const std::string& asset_id, Rng& rng) {
  num::NoGradGuard ng;
  const auto& cfg = vae.config;
  BuildPairsResult out;
  // one surface sample per asset, shared across views
  const PointCloud surface = sample_surface(mesh, sample_count, rng);
  const OccupancyGrid full_grid = voxelize(surface, cfg.n).grid;
  const Tensor q_gt = encode_ss(full_grid, vae);
  for (size_t v = 0; v < cameras.size(); ++v) {
    const Camera& cam = cameras[v];
    const DepthMap depth = render_depth_mesh(mesh, cam);
    double tau = 0.0;
    try {
      tau = compute_tau(depth, tau_fraction);
    } catch (const DataError&) {
      ++out.skipped_views;  // camera sees nothing
      continue;
    }
    const auto mask = observation_mask(surface, cam, depth, tau);
    const auto visible = extract_visible(surface, mask);
    if (visible.empty_warning) {
      ++out.skipped_views;
      continue;
    }
    const OccupancyGrid vis_grid = voxelize(visible.cloud, cfg.n).grid;
    const Tensor q_vis = encode_ss(vis_grid, vae);
    const Tensor m_s = mask_to_tensor(downsample_mask(vis_grid, cfg.r));
    const Tensor eps = Tensor::randn(q_vis.shape(), rng);
    TrainingPair pair;
    pair.q_comb = mix_latent(q_vis, m_s, eps);
    pair.m_s = m_s;
    pair.cond = cond;
    pair.q_gt = q_gt;
    pair.asset_id = asset_id;
    pair.view = int(v);
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

// --- synthetic shapes -------------------------------------------------------

namespace {

// 12-triangle axis-aligned box
TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  m.vertices = {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z},
                {lo.x, hi.y, lo.z}, {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z},
                {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
  m.triangles = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7},
                 {0, 1, 5}, {0, 5, 4}, {2, 3, 7}, {2, 7, 6},
                 {1, 2, 6}, {1, 6, 5}, {3, 0, 4}, {3, 4, 7}};
  return m;
}

void append_mesh(TriangleMesh& dst, const TriangleMesh& src) {
  const int base = int(dst.vertices.size());
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(),
                      src.vertices.end());
  for (const auto& t : src.triangles) {
    dst.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
}

// UV sphere, watertight
TriangleMesh make_sphere(const Vec3& center, double radius, int rings = 12,
                         int segments = 18) {
  TriangleMesh m;
  m.vertices.push_back(center + Vec3{0, 0, radius});
  for (int i = 1; i < rings; ++i) {
    const double phi = 3.14159265358979323846 * double(i) / double(rings);
    for (int j = 0; j < segments; ++j) {
      const double theta =
          2.0 * 3.14159265358979323846 * double(j) / double(segments);
      m.vertices.push_back(center + Vec3{radius * std::sin(phi) *
                                             std::cos(theta),
                                         radius * std::sin(phi) *
                                             std::sin(theta),
                                         radius * std::cos(phi)});
    }
  }
  m.vertices.push_back(center + Vec3{0, 0, -radius});
  const int south = int(m.vertices.size()) - 1;
  auto ring_vertex = [&](int ring, int seg) {
    return 1 + (ring - 1) * segments + (seg % segments);
  };
  for (int j = 0; j < segments; ++j) {
    m.triangles.push_back({0, ring_vertex(1, j), ring_vertex(1, j + 1)});
  }
  for (int i = 1; i < rings - 1; ++i) {
    for (int j = 0; j < segments; ++j) {
      const int a = ring_vertex(i, j), b = ring_vertex(i, j + 1);
      const int c = ring_vertex(i + 1, j), d = ring_vertex(i + 1, j + 1);
      m.triangles.push_back({a, c, d});
      m.triangles.push_back({a, d, b});
    }
  }
  for (int j = 0; j < segments; ++j) {
    m.triangles.push_back(
        {south, ring_vertex(rings - 1, j + 1), ring_vertex(rings - 1, j)});
  }
  return m;
}

}  // namespace

ShapeFamily shape_family_from_name(const std::string& name) {
  if (name == "boxes") return ShapeFamily::kBox;
  if (name == "spheres") return ShapeFamily::kSphere;
  if (name == "unions") return ShapeFamily::kUnion;
  if (name == "l-shapes") return ShapeFamily::kLShape;
  if (name == "mixed") return ShapeFamily::kMixed;
  throw UsageError("unknown shape family: " + name);
}

std::vector<SyntheticShape> gen_synthetic_shapes(int count, ShapeFamily family,
                                                 int cond_dim, Rng& rng) {
  if (count < 1) throw DataError("gen_synthetic_shapes: count must be >= 1");
  if (cond_dim < 10) throw DataError("gen_synthetic_shapes: cond_dim too small");
  std::vector<SyntheticShape> out;
  out.reserve(size_t(count));
  for (int i = 0; i < count; ++i) {
    ShapeFamily fam = family;
    if (family == ShapeFamily::kMixed) {
      fam = ShapeFamily(int(rng.next_below(4)));
    }
    SyntheticShape shape;
    shape.cond.assign(size_t(cond_dim), 0.0);
    shape.cond[size_t(int(fam))] = 1.0;  // family one-hot in slots 0..3
    double* params = shape.cond.data() + 4;
    switch (fam) {
      case ShapeFamily::kBox: {
        const double sx = rng.uniform(0.3, 1.0);
        const double sy = rng.uniform(0.3, 1.0);
        const double sz = rng.uniform(0.3, 1.0);
        shape.mesh = make_box({-sx / 2, -sy / 2, -sz / 2},
                              {sx / 2, sy / 2, sz / 2});
        params[0] = sx;
        params[1] = sy;
        params[2] = sz;
        shape.id = "box" + std::to_string(i);
        break;
      }
      case ShapeFamily::kSphere: {
        const double radius = rng.uniform(0.25, 0.5);
        shape.mesh = make_sphere({0, 0, 0}, radius);
        params[0] = radius;
        shape.id = "sphere" + std::to_string(i);
        break;
      }
      case ShapeFamily::kUnion: {
        const double s1 = rng.uniform(0.3, 0.7);
        const double s2 = rng.uniform(0.3, 0.7);
        const double off = rng.uniform(0.15, 0.45);
        shape.mesh = make_box({-0.5, -s1 / 2, -s1 / 2},
                              {-0.5 + s1, s1 / 2, s1 / 2});
        append_mesh(shape.mesh, make_box({-0.5 + off, -s2 / 2, -s2 / 2},
                                         {-0.5 + off + s2, s2 / 2, s2 / 2}));
        params[0] = s1;
        params[1] = s2;
        params[2] = off;
        shape.id = "union" + std::to_string(i);
        break;
      }
      case ShapeFamily::kLShape: {
        const double arm_w = rng.uniform(0.2, 0.4);
        const double len_a = rng.uniform(0.6, 1.0);
        const double len_b = rng.uniform(0.6, 1.0);
        const double depth = rng.uniform(0.2, 0.5);
        shape.mesh = make_box({0, 0, 0}, {len_a, arm_w, depth});
        append_mesh(shape.mesh, make_box({0, 0, 0}, {arm_w, len_b, depth}));
        params[0] = arm_w;
        params[1] = len_a;
        params[2] = len_b;
        params[3] = depth;
        shape.id = "lshape" + std::to_string(i);
        break;
      }
      case ShapeFamily::kMixed:
        break;  // unreachable
    }
    normalize_unit_cube(shape.mesh);
    out.push_back(std::move(shape));
  }
  return out;
}

// --- manifest / pair files --------------------------------------------------

void write_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "p23d-manifest 1 " << manifest.config_hash << "\n";
  for (const auto& e : manifest.entries) {
    os << "pair " << e.asset_id << " " << e.view << " " << e.file << "\n";
  }
  if (!os) throw DataError("write failed: " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path);
  Manifest m;
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty manifest: " + path);
  {
    std::istringstream ls(line);
    std::string tag;
    int version;
    if (!(ls >> tag >> version >> m.config_hash) || tag != "p23d-manifest") {
      throw DataError("bad manifest header: " + path);
    }
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    Manifest::Entry e;
    if (!(ls >> tag >> e.asset_id >> e.view >> e.file) || tag != "pair") {
      throw DataError("bad manifest record: " + line);
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw DataError("manifest has no records: " + path);
  return m;
}

void save_pair(const TrainingPair& pair, const std::string& path) {
  NamedTensors ts;
  ts.emplace_back("q_comb", pair.q_comb);
  ts.emplace_back("m_s", pair.m_s);
  ts.emplace_back("cond", Tensor::from_data({int(pair.cond.size())},
                                            pair.cond));
  ts.emplace_back("q_gt", pair.q_gt);
  save_checkpoint(path, ts);
}

TrainingPair load_pair(const std::string& path) {
  const NamedTensors ts = load_checkpoint(path);
  TrainingPair pair;
  pair.q_comb = find_tensor(ts, "q_comb");
  pair.m_s = find_tensor(ts, "m_s");
  pair.cond = find_tensor(ts, "cond").data();
  pair.q_gt = find_tensor(ts, "q_gt");
  return pair;
}

std::string save_pair_set(const std::vector<TrainingPair>& pairs,
                          const std::string& dir, uint32_t config_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Manifest manifest;
  manifest.config_hash = config_hash;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const std::string file =
        pairs[i].asset_id + "_v" + std::to_string(pairs[i].view) + ".p23d";
    save_pair(pairs[i], (fs::path(dir) / file).string());
    manifest.entries.push_back({pairs[i].asset_id, pairs[i].view, file});
  }
  const std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

std::vector<TrainingPair> load_pair_set(const std::string& manifest_path,
                                        uint32_t expected_hash) {
  namespace fs = std::filesystem;
  const Manifest manifest = read_manifest(manifest_path);
  if (manifest.config_hash != expected_hash) {
    throw DataError("manifest config hash mismatch: dataset built with a "
                    "different configuration");
  }
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<TrainingPair> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    const fs::path file = dir / e.file;
    if (!fs::exists(file)) {
      throw DataError("manifest references missing file: " + file.string());
    }
    TrainingPair pair = load_pair(file.string());
    pair.asset_id = e.asset_id;
    pair.view = e.view;
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace p23d
