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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "trisplat/backward.hpp"
#include "trisplat/sh.hpp"

namespace trisplat {
namespace {

using testing::make_camera;
using testing::random_triangle;
using testing::uniform;

Camera front_camera(int w, int h) {
  Camera cam;
  cam.intrinsics.width = w;
  cam.intrinsics.height = h;
  cam.intrinsics.fx = cam.intrinsics.fy = w;
  cam.intrinsics.cx = 0.5 * w;
  cam.intrinsics.cy = 0.5 * h;
  return cam;
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(1);
  std::vector<Triangle3D> tris;
  for (int i = 0; i < 5; ++i) tris.push_back(random_triangle(rng, 0.7, 0.5, 5, 0.1, 0.9));
  const Camera cam = make_camera(16, 16, Vec3(0, -3, 0.5), Vec3::Zero());
  const GradientSet g = render_backward(tris, cam, {}, std::vector<double>(3 * 256, 0.0));
  REQUIRE(g.size() == tris.size());
  for (const auto& tg : g)
    for (double v : tg.values) CHECK(v == 0.0);
}

TEST_CASE("opacity gradient of a single covering triangle") {
  const Camera cam = front_camera(8, 8);
  Triangle3D t;
  t.vertices = {Vec3(-10, -10, 2), Vec3(10, -10, 2), Vec3(0, 10, 2)};
  t.opacity = 0.6;
  t.sigma = 1.0;
  for (auto& c : t.sh) c.setZero();
  t.sh[0] = rgb_to_sh_dc(Vec3(0.8, 0.4, 0.2));
  RenderSettings s;
  s.background = Vec3(0.1, 0.1, 0.1);
  // Upstream selects the red channel of pixel (3, 4).
  std::vector<double> up(3 * 64, 0.0);
  up[3 * (4 * 8 + 3)] = 1.0;
  const GradientSet g = render_backward(std::vector<Triangle3D>{t}, cam, s, up);
  const auto proj = *project_triangle(t, cam.intrinsics, cam.pose);
  const double I = window_value(proj, pixel_center(3, 4), t.sigma);
  CHECK(g[0].opacity() == doctest::Approx(I * (0.8 - 0.1)).epsilon(1e-10));
}

TEST_CASE("finite differences of a linear parameter are exact") {
  std::mt19937_64 rng(5);
  const auto scene = testing::random_grad_scene(rng);
  const RenderSettings s;
  const GradientSet g = render_backward(scene.triangles, scene.camera, s, scene.weights);
  const SceneFunctional f = weighted_image_functional(scene.camera, s, scene.weights);
  for (int k = 11; k < kParamsPerTriangle; k += 7) {
    const double x = parameter(scene.triangles[0], k);
    const double fd = finite_difference(f, scene.triangles, 0, k, finite_difference_step(x));
    if (std::abs(g[0][k]) > 1e-9)
      CHECK(testing::relative_error(g[0][k], fd, 1e-12) < 1e-6);
  }
}

TEST_CASE("finite_difference_step stays in range") {
  CHECK(finite_difference_step(0.0) == 1e-5);
  CHECK(finite_difference_step(3.0) == doctest::Approx(3e-5));
  CHECK(finite_difference_step(1e6) == 1e-3);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(77);
  testing::GradCheckStats total;
  for (int trial = 0; trial < 30; ++trial) {
    const auto scene = testing::random_grad_scene(rng);
    RenderSettings s;
    s.background = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    total.merge(testing::gradient_check(scene.triangles, scene.camera, s, scene.weights));
  }
  MESSAGE("checked ", total.checked, " excluded ", total.excluded, " max rel ",
          total.max_rel_error, " at param ", total.worst_param);
  CHECK(total.checked > 0);
  CHECK(total.max_rel_error < 1e-3);
  CHECK(total.exclusion_rate() < 0.05);
}

TEST_CASE("sigmoid window gradients match central differences") {
  std::mt19937_64 rng(78);
  testing::GradCheckStats total;
  for (int trial = 0; trial < 10; ++trial) {
    const auto scene = testing::random_grad_scene(rng);
    RenderSettings s;
    s.mode = WindowMode::kSigmoid;
    total.merge(testing::gradient_check(scene.triangles, scene.camera, s, scene.weights));
  }
  CHECK(total.max_rel_error < 1e-3);
}

TEST_CASE("backward is linear in the upstream gradient") {
  std::mt19937_64 rng(19);
  const auto scene = testing::random_grad_scene(rng);
  std::vector<double> b(scene.weights.size()), sum(scene.weights.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    b[i] = uniform(rng, -1, 1);
    sum[i] = scene.weights[i] + b[i];
  }
  const GradientSet ga = render_backward(scene.triangles, scene.camera, {}, scene.weights);
  const GradientSet gb = render_backward(scene.triangles, scene.camera, {}, b);
  const GradientSet gs = render_backward(scene.triangles, scene.camera, {}, sum);
  for (std::size_t t = 0; t < ga.size(); ++t)
    for (int k = 0; k < kParamsPerTriangle; ++k)
      CHECK(gs[t][k] == doctest::Approx(ga[t][k] + gb[t][k]).epsilon(1e-9).scale(1e-9));
}

TEST_CASE("triangles with empty support get exactly zero gradient") {
  std::mt19937_64 rng(29);
  const Camera cam = make_camera(16, 16, Vec3(0, -3, 0.5), Vec3::Zero());
  std::vector<Triangle3D> tris{random_triangle(rng, 0.7, 0.5, 5, 0.1, 0.9),
                               random_triangle(rng, 0.7, 0.5, 5, 0.1, 0.9)};
  tris[1].opacity = 0.5 / 255.0;
  std::vector<double> up(3 * 256);
  for (double& u : up) u = uniform(rng, -1, 1);
  const GradientSet g = render_backward(tris, cam, {}, up);
  for (double v : g[1].values) CHECK(v == 0.0);
}

TEST_CASE("mismatched forward pass is rejected") {
  std::mt19937_64 rng(31);
  const Camera cam = make_camera(8, 8, Vec3(0, -3, 0.5), Vec3::Zero());
  std::vector<Triangle3D> tris{random_triangle(rng, 0.7, 0.5, 5, 0.1, 0.9)};
  const PreparedScene scene = prepare_scene(tris, cam, {});
  const RenderOutput fwd = render(scene);
  tris[0].opacity *= 0.5;
  UpstreamGradients up;
  up.d_image.assign(3 * 64, 1.0);
  CHECK_THROWS_AS(render_backward(scene, tris, fwd, up), std::invalid_argument);
}

TEST_CASE("backward is deterministic") {
  std::mt19937_64 rng(41);
  const auto scene = testing::random_grad_scene(rng);
  const GradientSet a = render_backward(scene.triangles, scene.camera, {}, scene.weights);
  const GradientSet b = render_backward(scene.triangles, scene.camera, {}, scene.weights);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t].values == b[t].values);
}

}  // namespace
}  // namespace trisplat
