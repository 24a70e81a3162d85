#include <cmath>
#include <fstream>

#include "doctest.h"
#include "p23d/dataset.hpp"
#include "p23d/error.hpp"
#include "test_helpers.hpp"

using namespace p23d;
using num::Tensor;

namespace {

LatentConfig tiny_config() {
  LatentConfig c;
  c.n = 8;
  c.r = 4;
  c.c_s = 2;
  c.c_m = 1;
  c.vae_hidden = 4;
  c.width = 8;
  c.blocks = 2;
  c.time_embed = 8;
  c.cond_dim = 16;
  return c;
}

}  // namespace

TEST_CASE("build_pairs yields one pair per view") {
  const auto cfg = tiny_config();
  Rng rng(1);
  const auto vae = VaeParams::init(cfg, rng);
  Rng srng(2);
  auto shapes = gen_synthetic_shapes(1, ShapeFamily::kBox, cfg.cond_dim, srng);
  ViewRingConfig rc;
  rc.n_views = 24;
  const auto cams = make_view_ring(rc);
  Rng prng(3);
  const auto res = build_pairs(shapes[0].mesh, vae, cams, 2000, 0.05,
                               shapes[0].cond, shapes[0].id, prng);
  CHECK(res.skipped_views == 0);
  REQUIRE(res.pairs.size() == 24);
  for (const auto& pair : res.pairs) {
    CHECK(pair.q_comb.shape() == num::Shape{2, 4, 4, 4});
    CHECK(pair.m_s.shape() == num::Shape{1, 4, 4, 4});
    CHECK(pair.q_gt.shape() == num::Shape{2, 4, 4, 4});
    CHECK(pair.cond.size() == 16);
    CHECK(pair.asset_id == shapes[0].id);
    for (int64_t i = 0; i < pair.m_s.size(); ++i) {
      const double v = pair.m_s.at(i);
      CHECK((v == 0.0 || v == 1.0));
    }
  }
  // views are distinct
  CHECK(res.pairs.front().view == 0);
  CHECK(res.pairs.back().view == 23);
}

TEST_CASE("build_pairs anchors q_comb to the visible encoding") {
  // m_s = downsample(voxelize(P_t)) and q_comb = m_s*q_vis + (1-m_s)*eps:
  // verify the construction identity on one rebuilt view
  const auto cfg = tiny_config();
  Rng rng(4);
  const auto vae = VaeParams::init(cfg, rng);
  Rng srng(5);
  auto shapes =
      gen_synthetic_shapes(1, ShapeFamily::kSphere, cfg.cond_dim, srng);
  ViewRingConfig rc;
  rc.n_views = 1;
  const auto cams = make_view_ring(rc);
  Rng prng(6);
  const auto res = build_pairs(shapes[0].mesh, vae, cams, 3000, 0.05,
                               shapes[0].cond, shapes[0].id, prng);
  REQUIRE(res.pairs.size() == 1);
  const auto& pair = res.pairs[0];

  // recompute the visible cloud with the identical inputs
  Rng prng2(6);
  const auto sample = sample_surface(shapes[0].mesh, 3000, prng2);
  const auto depth = render_depth_mesh(shapes[0].mesh, cams[0]);
  const double tau = compute_tau(depth, 0.05);
  const auto mask = observation_mask(sample, cams[0], depth, tau);
  const auto visible = extract_visible(sample, mask).cloud;
  REQUIRE_FALSE(visible.empty());
  const auto m_fine = voxelize(visible, cfg.n).grid;
  const auto m_s = downsample_mask(m_fine, cfg.r);
  const Tensor m_t = mask_to_tensor(m_s);
  for (int64_t i = 0; i < m_t.size(); ++i) CHECK(m_t.at(i) == pair.m_s.at(i));

  // anchored cells carry q_vis
  const Tensor q_vis = encode_ss(m_fine, vae);
  for (int c = 0; c < 2; ++c) {
    for (int64_t s = 0; s < 64; ++s) {
      if (m_t.at(s) == 1.0) {
        CHECK(pair.q_comb.at(c * 64 + s) == q_vis.at(c * 64 + s));
      }
    }
  }

  // q_gt is the encoding of the full-sample voxelization
  const Tensor q_gt = encode_ss(voxelize(sample, cfg.n).grid, vae);
  for (int64_t i = 0; i < q_gt.size(); ++i)
    CHECK(pair.q_gt.at(i) == q_gt.at(i));
}

TEST_CASE("build_pairs skips views that see nothing") {
  const auto cfg = tiny_config();
  Rng rng(7);
  const auto vae = VaeParams::init(cfg, rng);
  Rng srng(8);
  auto shapes = gen_synthetic_shapes(1, ShapeFamily::kBox, cfg.cond_dim, srng);
  // one good camera and one facing away from the object
  ViewRingConfig rc;
  rc.n_views = 1;
  auto cams = make_view_ring(rc);
  Camera away = cams[0];
  away.center = {10.0, 10.0, 10.0};  // object behind the (unchanged) view
  cams.push_back(away);
  Rng prng(9);
  const auto res = build_pairs(shapes[0].mesh, vae, cams, 1000, 0.05,
                               shapes[0].cond, shapes[0].id, prng);
  CHECK(res.skipped_views == 1);
  CHECK(res.pairs.size() == 1);
}

TEST_CASE("synthetic families") {
  const int cond_dim = 16;
  Rng rng(10);
  SUBCASE("boxes have 12 triangles and fill the unit cube") {
    const auto shapes = gen_synthetic_shapes(5, ShapeFamily::kBox, cond_dim,
                                             rng);
    REQUIRE(shapes.size() == 5);
    for (const auto& s : shapes) {
      CHECK(s.mesh.triangles.size() == 12);
      CHECK(s.cond[0] == 1.0);  // family one-hot
      double max_abs = 0.0;
      for (const auto& v : s.mesh.vertices) {
        max_abs = std::max({max_abs, std::abs(v.x), std::abs(v.y),
                            std::abs(v.z)});
      }
      CHECK(max_abs == doctest::Approx(0.5));
    }
  }
  SUBCASE("spheres sample at constant radius") {
    auto shapes = gen_synthetic_shapes(1, ShapeFamily::kSphere, cond_dim, rng);
    Rng srng(11);
    const auto cloud = sample_surface(shapes[0].mesh, 2000, srng);
    // normalized UV sphere: faceted radius slightly under 0.5
    double lo = 1e9, hi = 0.0;
    for (const auto& p : cloud.points) {
      lo = std::min(lo, p.norm());
      hi = std::max(hi, p.norm());
    }
    CHECK(hi <= 0.5 + 1e-9);
    CHECK(lo >= 0.40);
    CHECK(shapes[0].cond[1] == 1.0);
  }
  SUBCASE("union voxelization is the OR of its parts") {
    auto shapes = gen_synthetic_shapes(3, ShapeFamily::kUnion, cond_dim, rng);
    for (const auto& s : shapes) {
      CHECK(s.cond[2] == 1.0);
      // two boxes, 12 triangles each
      REQUIRE(s.mesh.triangles.size() == 24);
      TriangleMesh a, b;
      a.vertices = b.vertices = s.mesh.vertices;
      for (size_t t = 0; t < 12; ++t) a.triangles.push_back(s.mesh.triangles[t]);
      for (size_t t = 12; t < 24; ++t)
        b.triangles.push_back(s.mesh.triangles[t]);
      Rng s1(12), s2(12), s3(12);
      const auto ca = sample_surface(a, 4000, s1);
      const auto cb = sample_surface(b, 4000, s2);
      const auto ga = voxelize(ca, 8).grid;
      const auto gb = voxelize(cb, 8).grid;
      PointCloud both = ca;
      for (const auto& p : cb.points) both.points.push_back(p);
      const auto gu = voxelize(both, 8).grid;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          for (int k = 0; k < 8; ++k)
            CHECK(gu.get(i, j, k) == (ga.get(i, j, k) || gb.get(i, j, k)));
    }
  }
  SUBCASE("l-shapes and mixed families are produced") {
    auto l = gen_synthetic_shapes(2, ShapeFamily::kLShape, cond_dim, rng);
    CHECK(l[0].cond[3] == 1.0);
    auto mixed = gen_synthetic_shapes(8, ShapeFamily::kMixed, cond_dim, rng);
    CHECK(mixed.size() == 8);
    bool families[4] = {false, false, false, false};
    for (const auto& s : mixed) {
      for (int f = 0; f < 4; ++f) {
        if (s.cond[size_t(f)] == 1.0) families[f] = true;
      }
    }
    CHECK((families[0] || families[1] || families[2] || families[3]));
  }
}

TEST_CASE("shape_family_from_name") {
  CHECK(shape_family_from_name("boxes") == ShapeFamily::kBox);
  CHECK(shape_family_from_name("spheres") == ShapeFamily::kSphere);
  CHECK(shape_family_from_name("unions") == ShapeFamily::kUnion);
  CHECK(shape_family_from_name("l-shapes") == ShapeFamily::kLShape);
  CHECK(shape_family_from_name("mixed") == ShapeFamily::kMixed);
  CHECK_THROWS_AS(shape_family_from_name("torus"), UsageError);
}

TEST_CASE("manifest and pair set round trip") {
  const auto cfg = tiny_config();
  Rng rng(13);
  const auto vae = VaeParams::init(cfg, rng);
  Rng srng(14);
  auto shapes = gen_synthetic_shapes(1, ShapeFamily::kBox, cfg.cond_dim, srng);
  ViewRingConfig rc;
  rc.n_views = 3;
  const auto cams = make_view_ring(rc);
  Rng prng(15);
  const auto res = build_pairs(shapes[0].mesh, vae, cams, 1000, 0.05,
                               shapes[0].cond, shapes[0].id, prng);
  REQUIRE(res.pairs.size() == 3);

  const auto dir = testutil::temp_dir("dataset");
  const auto manifest_path =
      save_pair_set(res.pairs, (dir / "set").string(), 0xC0FFEEu);
  const auto loaded = load_pair_set(manifest_path, 0xC0FFEEu);
  REQUIRE(loaded.size() == 3);
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].asset_id == res.pairs[i].asset_id);
    CHECK(loaded[i].view == res.pairs[i].view);
    REQUIRE(loaded[i].cond.size() == res.pairs[i].cond.size());
    for (size_t j = 0; j < loaded[i].cond.size(); ++j) {
      // float32 on disk
      CHECK(loaded[i].cond[j] ==
            doctest::Approx(res.pairs[i].cond[j]).epsilon(1e-6));
    }
    for (int64_t j = 0; j < loaded[i].m_s.size(); ++j) {
      CHECK(loaded[i].m_s.at(j) == res.pairs[i].m_s.at(j));
    }
    for (int64_t j = 0; j < loaded[i].q_gt.size(); ++j) {
      // float32 on disk
      CHECK(loaded[i].q_gt.at(j) ==
            doctest::Approx(res.pairs[i].q_gt.at(j)).epsilon(1e-6));
    }
  }

  SUBCASE("hash mismatch refuses to load") {
    CHECK_THROWS_AS(load_pair_set(manifest_path, 0xDEADu), DataError);
  }
  SUBCASE("tampered manifest refuses to load") {
    std::ifstream is(manifest_path);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    is.close();
    const auto tampered = (dir / "set" / "tampered.txt").string();
    std::ofstream os(tampered);
    os << text << "pair ghost 0 missing_file.p23d\n";
    os.close();
    CHECK_THROWS_AS(load_pair_set(tampered, 0xC0FFEEu), DataError);
  }
  SUBCASE("empty manifest is an error") {
    const auto empty = testutil::write_file(dir / "empty.txt", "");
    CHECK_THROWS_AS(read_manifest(empty), DataError);
    Manifest m;
    m.config_hash = 1;
    const auto no_entries = (dir / "noentries.txt").string();
    write_manifest(m, no_entries);
    CHECK_THROWS_AS(load_pair_set(no_entries, 1), DataError);
  }
}

TEST_CASE("same seed rebuild gives identical pair bytes") {
  const auto cfg = tiny_config();
  Rng rng(16);
  const auto vae = VaeParams::init(cfg, rng);
  Rng srng(17);
  auto shapes = gen_synthetic_shapes(1, ShapeFamily::kLShape, cfg.cond_dim,
                                     srng);
  ViewRingConfig rc;
  rc.n_views = 2;
  const auto cams = make_view_ring(rc);
  const auto dir = testutil::temp_dir("dataset");
  auto build_once = [&](const std::string& sub) {
    Rng prng(18);
    const auto res = build_pairs(shapes[0].mesh, vae, cams, 800, 0.05,
                                 shapes[0].cond, shapes[0].id, prng);
    return save_pair_set(res.pairs, (dir / sub).string(), 5u);
  };
  const auto m1 = build_once("rebuild_a");
  const auto m2 = build_once("rebuild_b");
  const auto read_all = [](const std::string& manifest) {
    std::string blob;
    const auto m = read_manifest(manifest);
    for (const auto& e : m.entries) {
      std::ifstream is(e.file, std::ios::binary);
      blob.append((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());
    }
    return blob;
  };
  CHECK(read_all(m1) == read_all(m2));
}
