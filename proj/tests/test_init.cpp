// Copyright 2026 The trisplat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "trisplat/init.hpp"
#include "trisplat/sh.hpp"

namespace trisplat {
namespace {

using testing::uniform;

// Brute-force mean distance to the k nearest other points.
std::vector<double> knn_oracle(const std::vector<Vec3>& pts, int k) {
  std::vector<double> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) d.push_back((pts[i] - pts[j]).norm());
    std::sort(d.begin(), d.end());
    const std::size_t n = std::min<std::size_t>(k, d.size());
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += d[j];
    out.push_back(n ? s / n : 0.0);
  }
  return out;
}

SfmScene point_scene(const std::vector<Vec3>& pts, std::mt19937_64& rng) {
  SfmScene scene;
  CameraIntrinsics intr;
  intr.width = 32;
  intr.height = 32;
  intr.fx = intr.fy = 32;
  intr.cx = intr.cy = 16;
  scene.cameras[1] = intr;
  for (int v = 0; v < 3; ++v) {
    SfmView view;
    view.camera_id = 1;
    view.name = "v" + std::to_string(v);
    view.pose = CameraPose::look_at(5.0 * testing::random_unit(rng), Vec3::Zero(), Vec3::UnitZ());
    scene.views.push_back(view);
  }
  for (const Vec3& p : pts) {
    scene.points.push_back({p, Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1))});
  }
  return scene;
}

std::vector<Vec3> random_cloud(std::mt19937_64& rng, int n, double extent) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    pts.emplace_back(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                     uniform(rng, -extent, extent));
  }
  return pts;
}

TEST_CASE("grid knn matches brute force") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    auto pts = random_cloud(rng, 300, 1.0 + trial);
    // Some clustering so cells are uneven.
    for (int i = 0; i < 40; ++i) pts.push_back(pts[0] + 1e-3 * testing::random_unit(rng));
    for (int k : {1, 3, 7}) {
      const auto got = knn_mean_distance(pts, k);
      const auto want = knn_oracle(pts, k);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("vertices sit at k times the neighbor distance") {
  std::mt19937_64 rng(2);
  const auto pts = random_cloud(rng, 200, 2.0);
  const SfmScene scene = point_scene(pts, rng);
  InitConfig cfg;
  const auto tris = init_triangles(scene, cfg, rng);
  const auto d = knn_oracle(pts, cfg.knn);
  REQUIRE(tris.size() == pts.size());
  for (std::size_t i = 0; i < tris.size(); ++i) {
    for (const Vec3& v : tris[i].vertices) {
      CHECK((v - pts[i]).norm() == doctest::Approx(2.2 * d[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("initial opacity, sigma and color") {
  std::mt19937_64 rng(3);
  const SfmScene scene = point_scene(random_cloud(rng, 50, 1.0), rng);
  const auto tris = init_triangles(scene, InitConfig{}, rng);
  for (std::size_t i = 0; i < tris.size(); ++i) {
    CHECK(tris[i].opacity == 0.28);
    CHECK(tris[i].sigma == 1.16);
    CHECK((dc_color(tris[i].sh) - scene.points[i].rgb).norm() < 1e-12);
    for (int k = 1; k < kShCoeffCount; ++k) CHECK(tris[i].sh[k].isZero());
  }
}

TEST_CASE("two-point cloud uses the only neighbor") {
  std::mt19937_64 rng(4);
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(0.3, 0.4, 0)};
  const SfmScene scene = point_scene(pts, rng);
  const auto d = knn_mean_distance(pts, 3);
  CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-15));
  const auto tris = init_triangles(scene, InitConfig{}, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    for (const Vec3& v : tris[i].vertices) {
      CHECK((v - pts[i]).norm() == doctest::Approx(1.1).epsilon(1e-12));
    }
  }
}

TEST_CASE("coincident points fall back to the mean spacing") {
  std::mt19937_64 rng(5);
  std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0),
                        Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)};
  const auto tris = init_triangles(point_scene(pts, rng), InitConfig{}, rng);
  for (const Triangle3D& t : tris) {
    CHECK(t.is_finite());
    CHECK((t.vertices[1] - t.vertices[0]).cross(t.vertices[2] - t.vertices[0]).norm() > 0.0);
  }
}

TEST_CASE("initialization is reproducible and well shaped") {
  std::mt19937_64 scene_rng(6);
  const SfmScene scene = point_scene(random_cloud(scene_rng, 120, 1.0), scene_rng);
  std::mt19937_64 a(77), b(77);
  const auto ta = init_triangles(scene, InitConfig{}, a);
  const auto tb = init_triangles(scene, InitConfig{}, b);
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (int p = 0; p < kParamsPerTriangle; ++p) CHECK(parameter(ta[i], p) == parameter(tb[i], p));
    CHECK(min_angle_deg(ta[i]) >= 10.0);
  }
}

TEST_CASE("min angle of known triangles") {
  Triangle3D t;
  t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0)};
  CHECK(min_angle_deg(t) == doctest::Approx(60.0).epsilon(1e-12));
  t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK(min_angle_deg(t) == doctest::Approx(45.0).epsilon(1e-12));
  t.vertices = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 1, 0)};
  CHECK(min_angle_deg(t) == 0.0);
}

TEST_CASE("empty cloud falls back to random points in the bounds") {
  std::mt19937_64 rng(8);
  SfmScene scene = point_scene({}, rng);
  scene.bounds = Bounds{Vec3(-1, -1, 0), Vec3(1, 1, 2)};
  InitConfig cfg;
  cfg.fallback_points = 500;
  const auto tris = init_triangles(scene, cfg, rng);
  REQUIRE(tris.size() == 500);
  for (const Triangle3D& t : tris) {
    // The generating point is inside the box and every vertex is within k*d.
    const Vec3 c = t.centroid();
    const double r = (t.vertices[0] - c).norm() + (t.vertices[1] - c).norm() + (t.vertices[2] - c).norm();
    CHECK((c.array() >= scene.bounds->lo.array() - r).all());
    CHECK((c.array() <= scene.bounds->hi.array() + r).all());
    CHECK(t.opacity == 0.28);
  }
}

TEST_CASE("fallback bounds cover every camera frustum") {
  std::mt19937_64 rng(9);
  const SfmScene scene = point_scene({}, rng);
  const Bounds box = fallback_bounds(scene);
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    const Vec3 eye = scene.views[v].pose.center();
    CHECK((eye.array() >= box.lo.array() - 1e-9).all());
    CHECK((eye.array() <= box.hi.array() + 1e-9).all());
  }
  // Cameras look at the origin, which lies inside every truncated frustum.
  CHECK((box.lo.array() < 0.0).all());
  CHECK((box.hi.array() > 0.0).all());
}

TEST_CASE("init config validation") {
  InitConfig cfg;
  cfg.k = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = InitConfig{};
  cfg.min_angle_deg = 60.0;
  CHECK_THROWS(cfg.validate());
  cfg = InitConfig{};
  CHECK_NOTHROW(cfg.validate());
}

}  // namespace
}  // namespace trisplat
