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
#include "trisplat/loss.hpp"

namespace trisplat {
namespace {

using testing::uniform;

ImageBuffer random_image(std::mt19937_64& rng, int w, int h) {
  ImageBuffer img(w, h);
  for (double& v : img.rgb) v = uniform(rng, 0.0, 1.0);
  return img;
}

// Direct SSIM: full 2D Gaussian window, zero padding, mean over pixels and
// channels.
double ssim_oracle(const ImageBuffer& a, const ImageBuffer& b) {
  const int r = 5;
  double g[11], norm = 0.0;
  for (int i = -r; i <= r; ++i) norm += g[i + r] = std::exp(-i * i / (2 * 1.5 * 1.5));
  for (double& v : g) v /= norm;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < a.height; ++y) {
      for (int x = 0; x < a.width; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= a.width || yy >= a.height) continue;
            const double w = g[dx + r] * g[dy + r];
            const double va = a.at(xx, yy)[ch], vb = b.at(xx, yy)[ch];
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += (2 * ma * mb + c1) * (2 * cov + c2) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    }
  }
  return total / (3.0 * a.width * a.height);
}

TEST_CASE("photometric loss examples") {
  std::mt19937_64 rng(1);
  const ImageBuffer a = random_image(rng, 16, 12);
  CHECK(photometric_loss(a, a, 0.2).value == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const ImageBuffer zeros(8, 8, Vec3::Zero()), ones(8, 8, Vec3::Ones());
  CHECK(photometric_loss(zeros, ones, 0.0).value == doctest::Approx(1.0));
  const ImageBuffer b = random_image(rng, 16, 12);
  CHECK(photometric_loss(a, b, 0.0).value == doctest::Approx(photometric_loss(b, a, 0.0).value));
  CHECK_THROWS_AS(photometric_loss(a, zeros, 0.2), std::invalid_argument);
}

TEST_CASE("SSIM matches a direct evaluation") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const ImageBuffer a = random_image(rng, 32, 32), b = random_image(rng, 32, 32);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
  }
  const ImageBuffer a = random_image(rng, 20, 9);
  ImageBuffer b = a;
  for (double& v : b.rgb) v = std::clamp(v + uniform(rng, -0.1, 0.1), 0.0, 1.0);
  CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
  CHECK(ssim(a, a) == doctest::Approx(1.0));
}

TEST_CASE("photometric gradient matches finite differences") {
  std::mt19937_64 rng(3);
  const ImageBuffer r = random_image(rng, 13, 11), t = random_image(rng, 13, 11);
  const PhotometricLoss base = photometric_loss(r, t, 0.2);
  const SsimResult s = ssim_with_gradient(r, t);
  for (int k = 0; k < 60; ++k) {
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, r.rgb.size() - 1)(rng);
    const double h = 1e-6;
    ImageBuffer p = r, m = r;
    p.rgb[i] += h;
    m.rgb[i] -= h;
    const double fd = (photometric_loss(p, t, 0.2).value - photometric_loss(m, t, 0.2).value) / (2 * h);
    CHECK(testing::relative_error(base.d_image[i], fd, 1e-8) < 1e-4);
    const double fs = (ssim(p, t) - ssim(m, t)) / (2 * h);
    CHECK(testing::relative_error(s.d_a[i], fs, 1e-8) < 1e-4);
  }
}

TEST_CASE("opacity loss") {
  CHECK(opacity_loss(std::vector<double>{}).value == 0.0);
  CHECK(opacity_loss(std::vector<double>{0.0, 0.0}).value == 0.0);
  const ScalarLoss l = opacity_loss(std::vector<double>{0.2, 0.4});
  CHECK(l.value == doctest::Approx(0.3));
  CHECK(l.grad[0] == doctest::Approx(0.5));
  CHECK(l.grad[1] == doctest::Approx(0.5));
}

FragmentBuffer single_pixel(const std::vector<Fragment>& frags) {
  FragmentBuffer b;
  b.offsets = {0, frags.size()};
  b.items = frags;
  return b;
}

TEST_CASE("distortion loss examples") {
  CHECK(distortion_loss(single_pixel({{0, 0.7, 2.0}}), 1).value == 0.0);
  CHECK(distortion_loss(single_pixel({{0, 0.5, 2.0}, {1, 0.3, 2.0}}), 1).value == 0.0);
  CHECK(distortion_loss(single_pixel({{0, 0.5, 1.0}, {1, 0.5, 2.0}}), 1).value ==
        doctest::Approx(0.5));
}

TEST_CASE("distortion loss matches the pairwise sum and its derivatives") {
  std::mt19937_64 rng(4);
  const int pixels = 6;
  FragmentBuffer b;
  b.offsets.push_back(0);
  for (int p = 0; p < pixels; ++p) {
    const int n = p;  // includes empty and single-fragment pixels
    for (int k = 0; k < n; ++k)
      b.items.push_back({0, uniform(rng, 0.0, 0.5), k == 2 ? 1.5 : uniform(rng, 1.0, 3.0)});
    b.offsets.push_back(b.items.size());
  }
  auto pairwise = [&](const FragmentBuffer& fb) {
    double total = 0.0;
    for (int p = 0; p < pixels; ++p)
      for (const auto& fi : fb.pixel(p))
        for (const auto& fj : fb.pixel(p)) total += fi.weight * fj.weight * std::abs(fi.depth - fj.depth);
    return total / pixels;
  };
  const FragmentLoss l = distortion_loss(b, pixels);
  CHECK(l.value == doctest::Approx(pairwise(b)).epsilon(1e-12));
  for (std::size_t k = 0; k < b.items.size(); ++k) {
    const double h = 1e-7;
    FragmentBuffer p = b, m = b;
    p.items[k].weight += h;
    m.items[k].weight -= h;
    CHECK(testing::relative_error(l.d_weight[k], (pairwise(p) - pairwise(m)) / (2 * h), 1e-8) < 1e-4);
    p = b;
    m = b;
    p.items[k].depth += h;
    m.items[k].depth -= h;
    CHECK(testing::relative_error(l.d_depth[k], (pairwise(p) - pairwise(m)) / (2 * h), 1e-8) < 1e-4);
  }
}

Camera front_camera(int w, int h) {
  Camera cam;
  cam.intrinsics.width = w;
  cam.intrinsics.height = h;
  cam.intrinsics.fx = cam.intrinsics.fy = w;
  cam.intrinsics.cx = 0.5 * w;
  cam.intrinsics.cy = 0.5 * h;
  return cam;
}

TEST_CASE("normal loss of a fronto-parallel plane vanishes") {
  const Camera cam = front_camera(16, 16);
  Triangle3D t;
  t.vertices = {Vec3(-20, -20, 2), Vec3(20, -20, 2), Vec3(0, 20, 2)};
  t.opacity = 0.9;
  t.sigma = 0.5;
  RenderSettings s;
  s.collect_fragments = true;
  const std::vector<Triangle3D> tris{t};
  const RenderOutput out = render(tris, cam, s);
  CHECK(normal_loss(tris, out.fragments, out.depth, cam).value < 1e-3);
}

TEST_CASE("normal loss of a perpendicular triangle is the weight") {
  const Camera cam = front_camera(4, 4);
  Triangle3D t;
  t.vertices = {Vec3(0, -1, 1.5), Vec3(0, 1, 2.0), Vec3(0, 0, 2.5)};
  const std::vector<Triangle3D> tris{t};
  FragmentBuffer b;
  b.offsets.assign(17, 0);
  b.items = {{0, 0.37, 2.0}, {0, 0.0, 2.0}};
  for (int p = 5; p <= 16; ++p) b.offsets[p] = 2;  // both fragments at pixel 4
  const std::vector<double> depth(16, 2.0);
  const NormalLoss l = normal_loss(tris, b, depth, cam);
  CHECK(l.value == doctest::Approx(0.37 / 2).epsilon(1e-12));
  CHECK(l.d_weight[1] == doctest::Approx(0.5));
}

TEST_CASE("normal loss gradients match finite differences") {
  std::mt19937_64 rng(6);
  const Camera cam = testing::make_camera(16, 16, Vec3(0.3, -3, 0.8), Vec3::Zero(), 2.5);
  std::vector<Triangle3D> tris;
  for (int i = 0; i < 8; ++i) tris.push_back(testing::random_triangle(rng, 0.7, 0.5, 3, 0.3, 0.9));
  RenderSettings s;
  s.collect_fragments = true;
  const RenderOutput out = render(tris, cam, s);
  const NormalLoss l = normal_loss(tris, out.fragments, out.depth, cam);
  REQUIRE(l.value > 0.0);
  const double h = 1e-6;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (int k = 0; k < 9; ++k) {
      auto p = tris, m = tris;
      parameter(p[t], k) += h;
      parameter(m[t], k) -= h;
      const double fd = (normal_loss(p, out.fragments, out.depth, cam).value -
                         normal_loss(m, out.fragments, out.depth, cam).value) / (2 * h);
      CHECK(testing::relative_error(l.d_params[t][k], fd, 1e-9) < 1e-4);
    }
  }
  for (std::size_t k = 0; k < out.fragments.items.size(); k += 7) {
    FragmentBuffer p = out.fragments, m = out.fragments;
    p.items[k].weight += h;
    m.items[k].weight -= h;
    const double fd = (normal_loss(tris, p, out.depth, cam).value -
                       normal_loss(tris, m, out.depth, cam).value) / (2 * h);
    CHECK(testing::relative_error(l.d_weight[k], fd, 1e-9) < 1e-4);
  }
}

TEST_CASE("size loss examples") {
  Triangle3D t;
  t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK(size_loss(t).value == doctest::Approx(2.0));
  Triangle3D big = t;
  for (auto& v : big.vertices) v *= 2.0;
  CHECK(size_loss(big).value == doctest::Approx(0.5));
  Triangle3D flat = t;
  flat.vertices[2] = Vec3(2, 0, 0);
  const SizeLoss f = size_loss(flat);
  CHECK(f.value == doctest::Approx(2e8));
  for (const auto& d : f.d_vertices) CHECK(d.allFinite());
}

TEST_CASE("size loss is scale covariant and differentiable") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Triangle3D t = testing::random_triangle(rng, 1.0, 1, 1, 0.5, 0.5);
    const double a = uniform(rng, 0.2, 5.0);
    Triangle3D s = t;
    for (auto& v : s.vertices) v *= a;
    CHECK(size_loss(s).value == doctest::Approx(size_loss(t).value / (a * a)).epsilon(1e-10));
    const SizeLoss l = size_loss(t);
    for (int k = 0; k < 9; ++k) {
      Triangle3D p = t, m = t;
      parameter(p, k) += 1e-6;
      parameter(m, k) -= 1e-6;
      const double fd = (size_loss(p).value - size_loss(m).value) / 2e-6;
      CHECK(testing::relative_error(l.d_vertices[k / 3][k % 3], fd, 1e-9) < 1e-4);
    }
  }
}

TEST_CASE("total loss composition") {
  const LossWeights w;
  CHECK(total_loss({}, w) == 0.0);
  CHECK(w.beta_opacity == 0.0055);
  CHECK(w.beta_normal == 0.0001);
  CHECK(w.beta_size == 1e-8);
  LossTerms t{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  LossWeights w2 = w;
  w2.beta_opacity *= 2;
  w2.beta_distortion *= 2;
  w2.beta_normal *= 2;
  w2.beta_size *= 2;
  const double photo = 0.8 * 0.1 + 0.2 * 0.2;
  CHECK(total_loss(t, w2) - photo == doctest::Approx(2 * (total_loss(t, w) - photo)));
  LossWeights bad;
  bad.lambda_dssim = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("objective gradient matches finite differences of the total") {
  std::mt19937_64 rng(8);
  LossWeights w;
  w.beta_size = 1e-3;
  w.beta_distortion = 0.5;
  testing::GradCheckStats stats;
  for (int trial = 0; trial < 6; ++trial) {
    const auto gs = testing::random_grad_scene(rng);
    const auto& cam = gs.camera;
    RenderSettings s;
    s.collect_fragments = true;
    ImageBuffer target(cam.intrinsics.width, cam.intrinsics.height);
    for (double& v : target.rgb) v = uniform(rng, 0, 1);
    const ObjectiveOptions opt{true, false};
    auto f = [&](std::span<const Triangle3D> tris) {
      const PreparedScene scene = prepare_scene(tris, cam, s);
      return evaluate_objective(tris, scene, render(scene), target, w, opt).total;
    };
    const PreparedScene scene = prepare_scene(gs.triangles, cam, s);
    const RenderOutput fwd = render(scene);
    const Objective obj = evaluate_objective(gs.triangles, scene, fwd, target, w, opt);
    GradientSet g = render_backward(scene, gs.triangles, fwd, obj.upstream);
    accumulate(&g, obj.direct);
    const std::uint64_t sig = raster_state_signature(scene);
    for (std::size_t t = 0; t < gs.triangles.size(); ++t) {
      for (int k = 0; k < kParamsPerTriangle; ++k) {
        const double x = parameter(gs.triangles[t], k);
        const double h = finite_difference_step(x);
        auto p = gs.triangles, m = gs.triangles;
        parameter(p[t], k) = x + h;
        parameter(m[t], k) = x - h;
        if (raster_state_signature(prepare_scene(p, cam, s)) != sig ||
            raster_state_signature(prepare_scene(m, cam, s)) != sig) {
          ++stats.excluded;
          continue;
        }
        const double fd = (f(p) - f(m)) / (2 * h);
        ++stats.checked;
        stats.max_rel_error = std::max(stats.max_rel_error, testing::relative_error(g[t][k], fd, 1e-6));
      }
    }
  }
  MESSAGE("objective check: ", stats.checked, " checked, ", stats.excluded,
          " excluded, max rel ", stats.max_rel_error);
  CHECK(stats.max_rel_error < 1e-3);
}

}  // namespace
}  // namespace trisplat
