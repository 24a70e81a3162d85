#include <cmath>

#include "doctest.h"
#include "p23d/error.hpp"
#include "p23d/geometry.hpp"
#include "test_helpers.hpp"

using namespace p23d;

TEST_CASE("obj loader reads vertices and faces") {
  const auto dir = testutil::temp_dir("geometry");
  const auto path = testutil::write_file(
      dir / "tri.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const auto mesh = load_mesh(path, GeometryFormat::kObj);
  REQUIRE(mesh.vertices.size() == 3);
  REQUIRE(mesh.triangles.size() == 1);
  CHECK(mesh.triangles[0] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("obj loader handles slash refs and negative indices") {
  const auto dir = testutil::temp_dir("geometry");
  const auto path = testutil::write_file(
      dir / "slash.obj",
      "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\nf -3 -2 -1\n");
  const auto mesh = load_mesh(path, GeometryFormat::kObj);
  REQUIRE(mesh.triangles.size() == 2);
  CHECK(mesh.triangles[1] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("xyz loader reads triples") {
  const auto dir = testutil::temp_dir("geometry");
  const auto path = testutil::write_file(dir / "pts.xyz", "0 0 0\n1 0 0\n");
  const auto cloud = load_cloud(path, GeometryFormat::kXyz);
  REQUIRE(cloud.size() == 2);
  CHECK(cloud.points[1].x == 1.0);
}

TEST_CASE("malformed ply reports the offending line") {
  const auto dir = testutil::temp_dir("geometry");
  const auto path = testutil::write_file(
      dir / "bad.ply",
      "ply\nformat ascii 1.0\nelement vertex 3\n"
      "property float x\nproperty float y\nproperty float z\n"
      "end_header\n0 0 0\n1 0 0\n");
  try {
    load_cloud(path, GeometryFormat::kPly);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("vertex count") != std::string::npos);
    CHECK(msg.find(":10") != std::string::npos);
  }
}

TEST_CASE("empty geometry is an error") {
  const auto dir = testutil::temp_dir("geometry");
  const auto path = testutil::write_file(dir / "empty.xyz", "");
  CHECK_THROWS_AS(load_cloud(path, GeometryFormat::kXyz), DataError);
}

TEST_CASE("normalize_unit_cube cube and box") {
  std::vector<Vec3> cube = {{0, 0, 0}, {2, 2, 2}};
  normalize_unit_cube(cube);
  CHECK(cube[0].x == doctest::Approx(-0.5));
  CHECK(cube[1].z == doctest::Approx(0.5));

  std::vector<Vec3> box = {{0, 0, 0}, {4, 2, 2}};
  normalize_unit_cube(box);
  CHECK(box[0].x == doctest::Approx(-0.5));
  CHECK(box[1].x == doctest::Approx(0.5));
  CHECK(box[0].y == doctest::Approx(-0.25));
  CHECK(box[1].y == doctest::Approx(0.25));
}

TEST_CASE("normalize_unit_cube is idempotent and invertible") {
  Rng rng(11);
  std::vector<Vec3> pts(50);
  for (auto& p : pts) p = {rng.uniform(-3, 5), rng.uniform(0, 2), rng.normal()};
  const auto original = pts;
  const auto tf = normalize_unit_cube(pts);
  for (size_t i = 0; i < pts.size(); ++i) {
    const Vec3 back = tf.invert(pts[i]);
    CHECK(std::abs(back.x - original[i].x) <= 1e-9);
    CHECK(std::abs(back.y - original[i].y) <= 1e-9);
    CHECK(std::abs(back.z - original[i].z) <= 1e-9);
  }
  auto again = pts;
  const auto tf2 = normalize_unit_cube(again);
  CHECK(std::abs(tf2.scale - 1.0) <= 1e-12);
  CHECK(tf2.center.norm() <= 1e-12);
}

TEST_CASE("normalize rejects degenerate geometry") {
  std::vector<Vec3> single = {{1, 2, 3}};
  CHECK_THROWS_AS(normalize_unit_cube(single), DataError);
}

TEST_CASE("sample_surface stays on the triangle plane") {
  TriangleMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  mesh.triangles = {{0, 1, 2}};
  Rng rng(3);
  const auto cloud = sample_surface(mesh, 500, rng);
  REQUIRE(cloud.size() == 500);
  for (const auto& p : cloud.points) {
    CHECK(std::abs(p.z) <= 1e-9);
    CHECK(p.x >= -1e-9);
    CHECK(p.y >= -1e-9);
    CHECK(p.x + p.y <= 1.0 + 1e-9);
  }
}

TEST_CASE("sample_surface is area weighted") {
  TriangleMesh mesh;
  // area 4.5 triangle in x<0, area 0.5 triangle in x>0 (ratio 9:1)
  mesh.vertices = {{-3, 0, 0}, {0, 0, 0}, {-3, 3, 0},
                   {0.5, 0, 0}, {1.5, 0, 0}, {0.5, 1, 0}};
  mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
  Rng rng(4);
  const int n = 10000;
  const auto cloud = sample_surface(mesh, n, rng);
  int big = 0;
  for (const auto& p : cloud.points) big += p.x <= 0.0 ? 1 : 0;
  // binomial(10000, 0.9): sigma = 30, allow 3 sigma
  CHECK(std::abs(big - 9000) <= 90);
}

TEST_CASE("sample_surface exact count at evaluation scale") {
  TriangleMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  mesh.triangles = {{0, 1, 2}};
  Rng rng(5);
  CHECK(sample_surface(mesh, 50000, rng).size() == 50000);
}

TEST_CASE("world_to_camera basic cases") {
  Camera cam;
  const Vec3 p{0.3, -0.2, 0.9};
  SUBCASE("identity") {
    const Vec3 out = world_to_camera(p, cam);
    CHECK(out.x == p.x);
    CHECK(out.y == p.y);
    CHECK(out.z == p.z);
  }
  SUBCASE("camera at the point") {
    cam.center = p;
    const Vec3 out = world_to_camera(p, cam);
    CHECK(out.norm() == 0.0);
  }
  SUBCASE("90 degree rotation about z") {
    // active row-major R for +90deg about z applied as R*(p - t):
    // x' = -y, y' = x
    cam.rotation = {0, -1, 0, 1, 0, 0, 0, 0, 1};
    const Vec3 out = world_to_camera({1, 0, 0}, cam);
    CHECK(out.x == doctest::Approx(0.0));
    CHECK(out.y == doctest::Approx(1.0));
    CHECK(out.z == doctest::Approx(0.0));
  }
}

TEST_CASE("world_to_camera is rigid") {
  Rng rng(6);
  ViewRingConfig rc;
  rc.n_views = 5;
  const auto cams = make_view_ring(rc);
  for (const auto& cam : cams) {
    for (int i = 0; i < 20; ++i) {
      const Vec3 a{rng.normal(), rng.normal(), rng.normal()};
      const Vec3 b{rng.normal(), rng.normal(), rng.normal()};
      const double before = (a - b).norm();
      const double after =
          (world_to_camera(a, cam) - world_to_camera(b, cam)).norm();
      CHECK(std::abs(before - after) <= 1e-9);
      const Vec3 back = camera_to_world(world_to_camera(a, cam), cam);
      CHECK((back - a).norm() <= 1e-9);
    }
  }
}

TEST_CASE("project hand cases") {
  Camera cam;
  cam.fx = cam.fy = 100;
  cam.cx = cam.cy = 50;
  cam.width = cam.height = 100;
  SUBCASE("principal point") {
    const auto px = project({0, 0, 2.5}, cam);
    CHECK(px.in_front);
    CHECK(px.x == doctest::Approx(50));
    CHECK(px.y == doctest::Approx(50));
    CHECK(px.depth == doctest::Approx(2.5));
  }
  SUBCASE("projective scale invariance") {
    const auto a = project({0.2, 0.1, 1.0}, cam);
    const auto b = project({0.4, 0.2, 2.0}, cam);
    CHECK(a.x == doctest::Approx(b.x));
    CHECK(a.y == doctest::Approx(b.y));
  }
  SUBCASE("hand arithmetic") {
    const auto px = project({0.1, 0, 1}, cam);
    CHECK(px.x == doctest::Approx(60));
    CHECK(px.y == doctest::Approx(50));
  }
  SUBCASE("behind camera") {
    CHECK_FALSE(project({0, 0, -1}, cam).in_front);
    CHECK_FALSE(project({0, 0, 0}, cam).in_front);
  }
}

TEST_CASE("view ring geometry") {
  ViewRingConfig rc;
  rc.n_views = 8;
  const auto cams = make_view_ring(rc);
  REQUIRE(cams.size() == 8);
  for (size_t i = 0; i < cams.size(); ++i) {
    const auto& cam = cams[i];
    CHECK(cam.rotation_orthonormal());
    CHECK(std::abs((cam.center - rc.look_at).norm() - 1.8) <= 1e-9);
    // pitch 30 deg above horizontal
    CHECK(cam.center.z == doctest::Approx(1.8 * std::sin(M_PI / 6.0)));
    // yaw increments of 45 deg
    const double yaw = std::atan2(cam.center.y, cam.center.x);
    const double expect = 2.0 * M_PI * double(i) / 8.0;
    const double diff = std::remainder(yaw - expect, 2.0 * M_PI);
    CHECK(std::abs(diff) <= 1e-9);
    // look_at on the optical axis: it projects to the principal point
    const Vec3 target_cam = world_to_camera(rc.look_at, cam);
    CHECK(std::abs(target_cam.x) <= 1e-9);
    CHECK(std::abs(target_cam.y) <= 1e-9);
    CHECK(target_cam.z == doctest::Approx(1.8));
    // default intrinsics
    CHECK(cam.fx == doctest::Approx(double(rc.width)));
    CHECK(cam.cx == doctest::Approx(rc.width / 2.0));
  }
}

TEST_CASE("single equatorial camera looks at the target") {
  ViewRingConfig rc;
  rc.n_views = 1;
  rc.pitch_deg = 0.0;
  const auto cams = make_view_ring(rc);
  REQUIRE(cams.size() == 1);
  const Vec3 t = world_to_camera(rc.look_at, cams[0]);
  CHECK(std::abs(t.x) <= 1e-9);
  CHECK(std::abs(t.y) <= 1e-9);
  CHECK(t.z > 0.0);
  CHECK(std::abs(cams[0].center.z) <= 1e-9);
}

TEST_CASE("ply round trip through write_ply") {
  const auto dir = testutil::temp_dir("geometry");
  PointCloud cloud;
  cloud.points = {{0.25, -0.5, 1.0}, {1.5, 2.5, -3.5}};
  const auto path = (dir / "out.ply").string();
  write_ply(cloud, path);
  const auto back = load_cloud(path, GeometryFormat::kPly);
  REQUIRE(back.size() == 2);
  CHECK(back.points[1].y == doctest::Approx(2.5));
}
