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

// Times the tiled OpenMP renderer against the serial reference, plus the
// backward pass and the loss evaluation of one training step.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "CLI11.hpp"
#include "trisplat/backward.hpp"
#include "trisplat/loss.hpp"
#include "trisplat/mesh_io.hpp"
#include "trisplat/parallel.hpp"
#include "trisplat/render.hpp"

namespace {

using namespace trisplat;

double time_ms(int reps, const std::function<void()>& fn, bool warm_up = true) {
  if (warm_up) fn();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return 1e3 * std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() /
         reps;
}

// Small triangles scattered in a unit cube in front of the camera.
std::vector<Triangle3D> random_soup(int n, double edge, bool solid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Triangle3D> tris(n);
  for (Triangle3D& t : tris) {
    const Vec3 c(u(rng), u(rng), u(rng));
    for (Vec3& v : t.vertices) v = c + edge * Vec3(u(rng), u(rng), u(rng));
    t.opacity = solid ? 1.0 : 0.1 + 0.8 * unit(rng);
    t.sigma = solid ? 0.05 : 0.5 + 2.0 * unit(rng);
    for (Vec3& k : t.sh) k = 0.2 * Vec3(u(rng), u(rng), u(rng));
    t.sh[0] = Vec3(unit(rng), unit(rng), unit(rng));
  }
  return tris;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();
  CLI::App app{"renderer benchmark: tiled OpenMP vs serial reference"};
  int count = 100000, size = 256, reps = 3, tile = RenderSettings{}.tile_size;
  double edge = 0.02;
  bool soft = false, skip_reference = false;
  std::string model;
  app.add_option("--triangles", count, "random triangle count")->check(CLI::PositiveNumber);
  app.add_option("--size", size, "square image side")->check(CLI::PositiveNumber);
  app.add_option("--edge", edge, "random triangle extent");
  app.add_option("--reps", reps, "timed repetitions")->check(CLI::PositiveNumber);
  app.add_option("--tile", tile, "tile side in pixels")->check(CLI::PositiveNumber);
  app.add_option("--model", model, "benchmark a saved model instead")->check(CLI::ExistingFile);
  app.add_flag("--soft", soft, "random soft triangles instead of solid ones");
  app.add_flag("--skip-reference", skip_reference, "do not time the serial renderer");
  CLI11_PARSE(app, argc, argv);
  std::setvbuf(stdout, nullptr, _IOLBF, 0);

  RenderSettings settings;
  settings.tile_size = tile;
  std::vector<Triangle3D> tris;
  if (!model.empty()) {
    ModelInfo info;
    tris = load_model(model, &info);
    settings.mode = info.mode;
    settings.sh_degree = info.sh_degree;
  } else {
    tris = random_soup(count, edge, !soft, 7);
  }

  Vec3 lo = Vec3::Constant(1e300), hi = -lo;
  for (const Triangle3D& t : tris) {
    for (const Vec3& v : t.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double radius = std::max(0.5 * (hi - lo).norm(), 1e-3);
  Camera cam;
  cam.intrinsics.width = cam.intrinsics.height = size;
  cam.intrinsics.fx = cam.intrinsics.fy = 1.2 * size;
  cam.intrinsics.cx = cam.intrinsics.cy = 0.5 * size;
  cam.pose = CameraPose::look_at(center + Vec3(0.3, -2.0, 0.6).normalized() * 2.2 * radius, center,
                                 Vec3::UnitZ());

  std::printf("%zu triangles, %dx%d, %d threads\n", tris.size(), size, size, worker_threads());
  const double t_prepare = time_ms(reps, [&] { prepare_scene(tris, cam, settings); });
  const PreparedScene scene = prepare_scene(tris, cam, settings);
  const double t_tiled = time_ms(reps, [&] { render(scene); });
  std::printf("prepare          %9.2f ms\n", t_prepare);
  std::printf("render (tiled)   %9.2f ms\n", t_tiled);
  std::printf("forward total    %9.2f ms\n", t_prepare + t_tiled);
  if (!skip_reference) {
    // Every pixel visits every splat here, so one cold run is plenty.
    const double t_ref = time_ms(1, [&] { render_reference(scene); }, false);
    std::printf("render (serial)  %9.2f ms  (%.1fx)\n", t_ref, t_ref / t_tiled);
  }

  const RenderOutput forward = render(scene);
  ImageBuffer target(size, size, Vec3(0.5, 0.5, 0.5));
  const double t_loss = time_ms(reps, [&] {
    evaluate_objective(tris, scene, forward, target, LossWeights{}, ObjectiveOptions{});
  });
  const Objective obj =
      evaluate_objective(tris, scene, forward, target, LossWeights{}, ObjectiveOptions{});
  const double t_backward =
      time_ms(reps, [&] { render_backward(scene, tris, forward, obj.upstream); });
  std::printf("objective        %9.2f ms\n", t_loss);
  std::printf("backward         %9.2f ms\n", t_backward);
  return 0;
}
