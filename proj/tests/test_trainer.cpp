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
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "trisplat/backward.hpp"
#include "trisplat/init.hpp"
#include "trisplat/loss.hpp"
#include "trisplat/render.hpp"
#include "trisplat/scene.hpp"
#include "trisplat/trainer.hpp"

namespace fs = std::filesystem;

namespace trisplat {
namespace {

using testing::uniform;

const fs::path kTri3 = fs::path(TRISPLAT_SOURCE_DIR) / "fixtures" / "tri3";

struct Tri3 {
  SfmScene scene;
  std::vector<ImageBuffer> images;
  std::vector<Triangle3D> init;
};

const Tri3& tri3() {
  static const Tri3 data = [] {
    Tri3 d;
    d.scene = load_scene(kTri3);
    for (std::size_t v = 0; v < d.scene.views.size(); ++v) {
      d.images.push_back(load_view_image(d.scene, v));
    }
    std::mt19937_64 rng(11);
    d.init = init_triangles(d.scene, InitConfig{}, rng);
    return d;
  }();
  return data;
}

TrainConfig small_config(int iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.anneal_iterations = 0;
  cfg.log_every = 10;
  cfg.seed = 5;
  return cfg;
}

// Mean training-view L1 of a model, rendered independently of the trainer.
double train_l1(const std::vector<Triangle3D>& tris, int sh_degree) {
  const Tri3& d = tri3();
  RenderSettings settings;
  settings.sh_degree = sh_degree;
  double sum = 0.0;
  int n = 0;
  for (const std::size_t v : d.scene.train_views()) {
    const ImageBuffer img = render(tris, d.scene.camera(v), settings).image;
    double l1 = 0.0;
    for (std::size_t i = 0; i < img.rgb.size(); ++i) l1 += std::abs(img.rgb[i] - d.images[v].rgb[i]);
    sum += l1 / static_cast<double>(img.rgb.size());
    ++n;
  }
  return sum / n;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

GradientSet zero_grads(std::size_t n) { return GradientSet(n); }

Triangle3D plain_triangle() {
  Triangle3D t;
  t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  t.opacity = 0.5;
  t.sigma = 1.0;
  for (Vec3& k : t.sh) k = Vec3(0.1, 0.2, 0.3);
  return t;
}

TEST_CASE("adam leaves parameters alone for a zero gradient") {
  std::vector<Triangle3D> tris{plain_triangle(), plain_triangle()};
  const auto before = tris;
  AdamState state(2);
  std::array<double, kParamsPerTriangle> rates;
  rates.fill(0.01);
  adam_step(tris, zero_grads(2), &state, rates);
  CHECK(state.step_count() == 1);
  for (std::size_t i = 0; i < tris.size(); ++i) {
    for (int k = 0; k < kParamsPerTriangle; ++k) CHECK(parameter(tris[i], k) == parameter(before[i], k));
  }
}

TEST_CASE("adam first step moves by the learning rate") {
  std::vector<Triangle3D> tris{plain_triangle()};
  AdamState state(1);
  GradientSet g(1);
  for (int k = 0; k < kParamsPerTriangle; ++k) g[0][k] = 1.0;
  std::array<double, kParamsPerTriangle> rates;
  rates.fill(0.001);
  const Triangle3D before = tris[0];
  adam_step(tris, g, &state, rates);
  // Bias-corrected moments are both 1 after one step.
  for (int k = 0; k < kParamsPerTriangle; ++k) {
    CHECK(parameter(tris[0], k) - parameter(before, k) ==
          doctest::Approx(-0.001).epsilon(1e-12));
  }
  CHECK(state.first_moment(0, 0) == doctest::Approx(0.1));
  CHECK(state.second_moment(0, 0) == doctest::Approx(0.001));
}

TEST_CASE("adam clamps opacity and sigma") {
  std::vector<Triangle3D> tris{plain_triangle()};
  tris[0].opacity = 0.9;
  tris[0].sigma = 0.002;
  AdamState state(1);
  GradientSet g(1);
  g[0].opacity() = -1.0;  // step +0.6 would give 1.5
  g[0].sigma() = 1.0;     // step -0.6 would go negative
  std::array<double, kParamsPerTriangle> rates{};
  rates[9] = 0.6;
  rates[10] = 0.6;
  adam_step(tris, g, &state, rates);
  CHECK(tris[0].opacity == 1.0 - 1e-4);
  CHECK(tris[0].sigma == kSigmaMin);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  std::vector<Triangle3D> tris{plain_triangle(), plain_triangle()};
  AdamState state(2);
  GradientSet g(2);
  g[1][5] = std::nan("");
  std::array<double, kParamsPerTriangle> rates;
  rates.fill(0.01);
  try {
    adam_step(tris, g, &state, rates);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("triangle 1") != std::string::npos);
    CHECK(msg.find("parameter 5") != std::string::npos);
  }
  CHECK(state.step_count() == 0);
  CHECK_THROWS(adam_step(tris, GradientSet(1), &state, rates));
}

TEST_CASE("each parameter group gets its own rate") {
  LearningRates lr;
  lr.spatial_scale = 2.0;
  const auto rates = parameter_rates(lr, 0, 100);
  for (int k = 0; k < kParamsPerTriangle; ++k) {
    // A lone unit gradient moves exactly one parameter by its rate.
    std::vector<Triangle3D> tris{plain_triangle()};
    const Triangle3D before = tris[0];
    AdamState state(1);
    GradientSet g(1);
    g[0][k] = 1.0;
    adam_step(tris, g, &state, rates);
    double want;
    if (k < 9) want = 2.0 * 0.0018;
    else if (k == 9) want = 0.014;
    else if (k == 10) want = 0.0008;
    else if (k < 14) want = 0.0025;
    else want = 0.0025 / 20.0;
    for (int j = 0; j < kParamsPerTriangle; ++j) {
      const double delta = parameter(tris[0], j) - parameter(before, j);
      if (j == k) {
        CHECK(delta == doctest::Approx(-want).epsilon(1e-12));
      } else {
        CHECK(delta == 0.0);
      }
    }
  }
}

TEST_CASE("vertex rate decays exponentially to the final factor") {
  LearningRates lr;
  lr.spatial_scale = 1.0;
  CHECK(lr.vertex_at(0, 1000) == doctest::Approx(0.0018).epsilon(1e-14));
  CHECK(lr.vertex_at(500, 1000) == doctest::Approx(0.00018).epsilon(1e-12));
  CHECK(lr.vertex_at(1000, 1000) == doctest::Approx(0.000018).epsilon(1e-12));
  CHECK(lr.vertex_at(250, 1000) / lr.vertex_at(0, 1000) ==
        doctest::Approx(lr.vertex_at(1000, 1000) / lr.vertex_at(750, 1000)).epsilon(1e-12));
}

TEST_CASE("moments follow triangles through densification") {
  std::vector<Triangle3D> tris{plain_triangle(), plain_triangle(), plain_triangle()};
  AdamState state(3);
  GradientSet g(3);
  for (int i = 0; i < 3; ++i) g[i][0] = i + 1.0;
  std::array<double, kParamsPerTriangle> rates;
  rates.fill(0.0);
  adam_step(tris, g, &state, rates);
  const std::vector<std::int64_t> origin{2, -1, 0};
  state.remap(origin);
  REQUIRE(state.size() == 3);
  CHECK(state.first_moment(0, 0) == doctest::Approx(0.3));
  CHECK(state.first_moment(1, 0) == 0.0);
  CHECK(state.second_moment(1, 0) == 0.0);
  CHECK(state.first_moment(2, 0) == doctest::Approx(0.1));
  CHECK(state.step_count() == 1);
}

TEST_CASE("random optimizer steps never leave the clamp ranges") {
  std::mt19937_64 rng(12);
  std::vector<Triangle3D> tris;
  for (int i = 0; i < 20; ++i) tris.push_back(testing::random_triangle(rng, 0.5, 0.01, 3, 0.01, 0.99));
  AdamState state(tris.size());
  std::array<double, kParamsPerTriangle> rates;
  rates.fill(0.3);
  for (int step = 0; step < 200; ++step) {
    GradientSet g(tris.size());
    for (auto& tg : g)
      for (double& v : tg.values) v = uniform(rng, -5, 5);
    adam_step(tris, g, &state, rates);
    for (const Triangle3D& t : tris) {
      CHECK(t.opacity >= kOpacityMin);
      CHECK(t.opacity <= kOpacityMax);
      CHECK(t.sigma >= kSigmaMin);
      CHECK(t.sigma <= kSigmaMax);
    }
  }
}

TEST_CASE("zero iterations leave the triangles unchanged") {
  const Tri3& d = tri3();
  const TrainResult r = train(d.scene, d.images, d.init, small_config(0));
  REQUIRE(r.triangles.size() == d.init.size());
  for (std::size_t i = 0; i < d.init.size(); ++i) {
    for (int k = 0; k < kParamsPerTriangle; ++k) CHECK(parameter(r.triangles[i], k) == parameter(d.init[i], k));
  }
  CHECK(r.log.empty());
  CHECK_FALSE(r.solid);
}

TEST_CASE("200 iterations on the three-triangle scene lower the training L1") {
  const Tri3& d = tri3();
  const TrainConfig cfg = small_config(200);
  std::vector<MetricsRecord> seen;
  const TrainResult r =
      train(d.scene, d.images, d.init, cfg, [&](const MetricsRecord& m) { seen.push_back(m); });
  const double before = train_l1(d.init, 0);
  const double after = train_l1(r.triangles, std::min(cfg.max_sh_degree, 200 / cfg.sh_degree_interval));
  MESSAGE("train L1 " << before << " -> " << after);
  CHECK(after < before);

  REQUIRE(r.loss_history.size() == 200);
  const std::vector<double> first(r.loss_history.begin(), r.loss_history.begin() + 50);
  const std::vector<double> last(r.loss_history.end() - 50, r.loss_history.end());
  CHECK(median(last) < median(first));

  REQUIRE(seen.size() == 20);
  CHECK(seen.front().iteration == 10);
  CHECK(seen.back().iteration == 200);
  CHECK(seen.size() == r.log.size());
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Tri3& d = tri3();
  TrainConfig cfg = small_config(120);
  cfg.densify.start_iter = 40;
  cfg.densify.interval = 40;
  const TrainResult a = train(d.scene, d.images, d.init, cfg);
  const TrainResult b = train(d.scene, d.images, d.init, cfg);
  REQUIRE(a.triangles.size() == b.triangles.size());
  CHECK(a.loss_history == b.loss_history);
  for (std::size_t i = 0; i < a.triangles.size(); ++i) {
    for (int k = 0; k < kParamsPerTriangle; ++k) {
      CHECK(std::abs(parameter(a.triangles[i], k) - parameter(b.triangles[i], k)) <= 1e-6);
    }
  }
}

TEST_CASE("the anneal phase ends with solid triangles") {
  const Tri3& d = tri3();
  TrainConfig cfg = small_config(600);
  cfg.anneal_iterations = 300;
  const TrainResult r = train(d.scene, d.images, d.init, cfg);
  CHECK(r.solid);
  CHECK(r.pre_anneal.size() >= r.triangles.size());
  CHECK_FALSE(r.triangles.empty());
  for (const Triangle3D& t : r.triangles) {
    CHECK(t.opacity == 1.0);
    for (int k = 1; k < kShCoeffCount; ++k) CHECK(t.sh[k].isZero());
  }
  // The penalty pulls sigma down from its pre-anneal value.
  double pre = 0.0, post = 0.0;
  for (const Triangle3D& t : r.pre_anneal) pre += t.sigma;
  for (const Triangle3D& t : r.triangles) post += t.sigma;
  CHECK(post / r.triangles.size() < pre / r.pre_anneal.size());
}

TEST_CASE("anneal_for_export prunes by opacity and freezes color") {
  const Tri3& d = tri3();
  std::vector<Triangle3D> tris = d.init;
  tris[1].opacity = 0.001;  // one step of opacity_lr cannot lift it past 0.022
  TrainConfig cfg = small_config(0);
  cfg.anneal_iterations = 1;
  const TrainResult r = anneal_for_export(d.scene, d.images, tris, cfg);
  CHECK(r.solid);
  CHECK(r.triangles.size() == 2);
  for (const Triangle3D& t : r.triangles) {
    CHECK(t.opacity == 1.0);
    for (int k = 1; k < kShCoeffCount; ++k) CHECK(t.sh[k].isZero());
  }
  // Degree-0 colors do not depend on the view.
  RenderSettings s;
  s.sh_degree = kMaxShDegree;
  const PreparedScene a = prepare_scene(r.triangles, d.scene.camera(0), s);
  const PreparedScene b = prepare_scene(r.triangles, d.scene.camera(3), s);
  for (const Splat& sa : a.splats) {
    for (const Splat& sb : b.splats) {
      if (sa.proj.source_index == sb.proj.source_index) CHECK((sa.color - sb.color).norm() == 0.0);
    }
  }
}

TEST_CASE("solidify applies the prune threshold") {
  std::vector<Triangle3D> tris{plain_triangle(), plain_triangle(), plain_triangle()};
  tris[0].opacity = 0.02;
  tris[1].opacity = 0.022;
  tris[2].opacity = 0.7;
  const auto solid = solidify(tris, 0.022);
  REQUIRE(solid.size() == 2);
  CHECK(solid[0].opacity == 1.0);
  CHECK(solid[0].sh[0] == tris[1].sh[0]);
  CHECK(solid[1].sh[3].isZero());
  CHECK(solid[1].sigma == tris[2].sigma);
}

TEST_CASE("training rejects mismatched inputs") {
  const Tri3& d = tri3();
  std::vector<ImageBuffer> short_list(d.images.begin(), d.images.end() - 1);
  CHECK_THROWS_AS(train(d.scene, short_list, d.init, small_config(1)), std::invalid_argument);
  std::vector<ImageBuffer> wrong = d.images;
  wrong[0] = ImageBuffer(8, 8);
  CHECK_THROWS_AS(train(d.scene, wrong, d.init, small_config(1)), std::invalid_argument);
}

TEST_CASE("indoor and outdoor presets") {
  const TrainConfig out = TrainConfig::outdoor();
  CHECK(out.lr.feature == 0.0025);
  CHECK(out.lr.opacity == 0.014);
  CHECK(out.lr.vertex_init == 0.0018);
  CHECK(out.lr.sigma == 0.0008);
  CHECK(out.weights.beta_normal == 0.0001);
  CHECK(out.weights.beta_opacity == 0.0055);
  CHECK(out.weights.beta_size == 1e-8);
  CHECK(out.densify.max_noise_factor == 1.5);
  CHECK(out.densify.opacity_dead == 0.014);
  CHECK(out.densify.tau_small == 24.0);
  CHECK(out.densify.tau_prune == 0.022);
  CHECK(out.init.init_opacity == 0.28);
  CHECK(out.init.init_sigma == 1.16);
  CHECK(out.iterations == 30000);

  const TrainConfig in = TrainConfig::indoor();
  CHECK(in.lr.vertex_init == 0.0015);
  CHECK(in.weights.beta_normal == 0.00004);
  CHECK(in.weights.beta_size == 5e-8);
  CHECK(in.densify.tau_prune == 0.0256);
}

TEST_CASE("config keys, files and snapshots") {
  TrainConfig cfg;
  cfg.set("feature_lr", "0.01");
  cfg.set("lr_convex_points_init", "2e-3");
  cfg.set("split_size", "30");
  cfg.set("window", "sigmoid");
  cfg.set("background", "1,0.5,0");
  cfg.set("iterations", "7");
  CHECK(cfg.lr.feature == 0.01);
  CHECK(cfg.lr.vertex_init == 0.002);
  CHECK(cfg.densify.tau_small == 30.0);
  CHECK(cfg.mode == WindowMode::kSigmoid);
  CHECK(cfg.background == Vec3(1, 0.5, 0));
  CHECK(cfg.iterations == 7);
  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("feature_lr", "fast"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("iterations", "2.5"), std::invalid_argument);

  // A snapshot replays to the same configuration.
  TrainConfig replay = TrainConfig::indoor();
  for (const auto& [k, v] : cfg.snapshot()) replay.set(k, v);
  CHECK(replay.snapshot() == cfg.snapshot());

  testing::ScratchDir dir("cfg");
  std::ofstream(dir / "a.cfg") << "# comment\n\nlambda_opacity = 0.01\n  opacity_lr=0.02  # trailing\n";
  const auto kv = read_config_file(dir / "a.cfg");
  CHECK(kv.at("lambda_opacity") == "0.01");
  CHECK(kv.at("opacity_lr") == "0.02");
  std::ofstream(dir / "b.cfg") << "lambda_opacity 0.01\n";
  CHECK_THROWS(read_config_file(dir / "b.cfg"));
}

TEST_CASE("metrics rows match the header") {
  MetricsRecord r;
  r.iteration = 3;
  r.loss = 0.5;
  r.l1 = 0.25;
  r.dssim = 0.125;
  r.psnr = 20.0;
  r.triangles = 9;
  const std::string row = format_metrics(r);
  CHECK(std::count(row.begin(), row.end(), ',') ==
        std::count(kMetricsHeader, kMetricsHeader + std::strlen(kMetricsHeader), ','));
  CHECK(row.rfind("3,0.5,", 0) == 0);
  CHECK(row.substr(row.size() - 2) == ",9");
}

}  // namespace
}  // namespace trisplat
