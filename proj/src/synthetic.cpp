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

#include "trisplat/synthetic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "trisplat/image_io.hpp"
#include "trisplat/render.hpp"
#include "trisplat/sh.hpp"

namespace fs = std::filesystem;

namespace trisplat {
namespace {

constexpr double kCubeHalf = 0.5;
const Vec3 kCubeCenter(0.0, 0.0, 0.5);
constexpr double kGroundHalf = 1.5;

int checker(double u, double v, int tiles) {
  const int a = static_cast<int>(std::floor(u * tiles));
  const int b = static_cast<int>(std::floor(v * tiles));
  return (a + b) & 1;
}

Vec3 cube_color(int axis, int side, double u, double v) {
  static const Vec3 palette[6] = {Vec3(0.85, 0.30, 0.25), Vec3(0.25, 0.65, 0.35),
                                  Vec3(0.25, 0.40, 0.85), Vec3(0.90, 0.75, 0.25),
                                  Vec3(0.70, 0.35, 0.75), Vec3(0.30, 0.75, 0.80)};
  const Vec3 base = palette[2 * axis + side];
  const double shade = checker(u, v, 3) ? 1.0 : 0.7;
  // Gentle gradient across the face.
  return (shade * (0.85 + 0.15 * u) * base).cwiseMin(1.0);
}

Vec3 ground_color(double x, double y) {
  const double u = (x + kGroundHalf) / (2 * kGroundHalf);
  const double v = (y + kGroundHalf) / (2 * kGroundHalf);
  return checker(u, v, 6) ? Vec3(0.60, 0.55, 0.45) : Vec3(0.35, 0.40, 0.50);
}

double ray_box(const Vec3& o, const Vec3& d, int* axis, int* side) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int hit_axis = -1, hit_side = 0;
  for (int a = 0; a < 3; ++a) {
    const double lo = kCubeCenter[a] - kCubeHalf, hi = kCubeCenter[a] + kCubeHalf;
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo || o[a] > hi) return -1.0;
      continue;
    }
    double ta = (lo - o[a]) / d[a], tb = (hi - o[a]) / d[a];
    int s = 0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1;
    }
    if (ta > t0) {
      t0 = ta;
      hit_axis = a;
      hit_side = s;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return -1.0;
  }
  if (hit_axis < 0) return -1.0;  // origin inside the cube
  *axis = hit_axis;
  *side = hit_side;
  return t0;
}

CameraPose orbit_pose(double azimuth, double elevation, double radius) {
  const Vec3 target(0.0, 0.0, 0.35);
  const Vec3 eye = target + radius * Vec3(std::cos(elevation) * std::cos(azimuth),
                                          std::cos(elevation) * std::sin(azimuth),
                                          std::sin(elevation));
  return CameraPose::look_at(eye, target, Vec3::UnitZ());
}

std::string view_name(int i) {
  std::string s = std::to_string(i);
  return "view_" + std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s + ".png";
}

}  // namespace

Vec3 trace_cube_scene(const Vec3& origin, const Vec3& dir) {
  double best = std::numeric_limits<double>::infinity();
  Vec3 color = Vec3::Zero();
  int axis = 0, side = 0;
  const double tc = ray_box(origin, dir, &axis, &side);
  if (tc > 0.0) {
    best = tc;
    const Vec3 p = origin + tc * dir;
    const Vec3 local = (p - kCubeCenter) / (2 * kCubeHalf) + Vec3::Constant(0.5);
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    color = cube_color(axis, side, std::clamp(local[ua], 0.0, 1.0),
                       std::clamp(local[va], 0.0, 1.0));
  }
  if (std::abs(dir.z()) > 1e-15) {
    const double tg = -origin.z() / dir.z();
    if (tg > 0.0 && tg < best) {
      const Vec3 p = origin + tg * dir;
      if (std::abs(p.x()) <= kGroundHalf && std::abs(p.y()) <= kGroundHalf) {
        color = ground_color(p.x(), p.y());
      }
    }
  }
  return color;
}

SfmScene write_cube_scene(const fs::path& dir, const CubeSceneOptions& opt) {
  fs::create_directories(dir / "images");
  SfmScene scene;
  scene.root = dir;
  CameraIntrinsics intr;
  intr.width = opt.width;
  intr.height = opt.height;
  intr.fx = intr.fy = 1.05 * opt.width;
  intr.cx = 0.5 * opt.width;
  intr.cy = 0.5 * opt.height;
  scene.cameras[1] = intr;
  scene.bounds = Bounds{Vec3(-kGroundHalf, -kGroundHalf, -0.05),
                        Vec3(kGroundHalf, kGroundHalf, 2 * kCubeHalf + 0.05)};

  const int total = opt.train_views + opt.test_views;
  // Test views are interleaved evenly between training views.
  const int stride = opt.test_views > 0 ? std::max(1, total / opt.test_views) : total + 1;
  for (int i = 0; i < total; ++i) {
    const double azimuth = 2.0 * std::numbers::pi * i / total;
    const double elevation = 0.45 + 0.2 * std::sin(3.0 * azimuth);
    SfmView view;
    view.pose = orbit_pose(azimuth, elevation, 3.6);
    view.camera_id = 1;
    view.name = view_name(i);
    view.image = fs::path("images") / view.name;
    int test_so_far = 0;
    for (const SfmView& v : scene.views) test_so_far += v.holdout;
    view.holdout = test_so_far < opt.test_views && i % stride == stride / 2;
    scene.views.push_back(view);

    ImageBuffer img(opt.width, opt.height);
    const Vec3 origin = view.pose.center();
    const Mat3 to_world = view.pose.rotation.transpose();
    const int ss = std::max(1, opt.supersample);
    for (int y = 0; y < opt.height; ++y) {
      for (int x = 0; x < opt.width; ++x) {
        Vec3 sum = Vec3::Zero();
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            const Vec2 p(x + (sx + 0.5) / ss, y + (sy + 0.5) / ss);
            sum += trace_cube_scene(origin, (to_world * pixel_ray(intr, p)).normalized());
          }
        }
        img.set(x, y, sum / (ss * ss));
      }
    }
    save_png(img, dir / view.image);
  }
  save_native(scene, dir / "scene.txt");
  return scene;
}

SfmScene write_tri3_scene(const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::vector<Triangle3D> tris(3);
  const Vec3 colors[3] = {Vec3(0.9, 0.2, 0.2), Vec3(0.2, 0.8, 0.3), Vec3(0.2, 0.3, 0.9)};
  const Vec3 offsets[3] = {Vec3(-0.35, 0.0, 0.0), Vec3(0.35, 0.1, 0.0), Vec3(0.0, -0.1, 0.3)};
  for (int i = 0; i < 3; ++i) {
    const Vec3& c = offsets[i];
    tris[i].vertices = {c + Vec3(-0.3, 0, -0.2), c + Vec3(0.3, 0.05, -0.2), c + Vec3(0, -0.05, 0.3)};
    tris[i].opacity = 1.0;
    tris[i].sigma = 0.05;
    tris[i].sh[0] = rgb_to_sh_dc(colors[i]);
  }

  SfmScene scene;
  scene.root = dir;
  CameraIntrinsics intr;
  intr.width = intr.height = 32;
  intr.fx = intr.fy = 36;
  intr.cx = intr.cy = 16;
  scene.cameras[1] = intr;
  for (int i = 0; i < 3; ++i) scene.points.push_back({tris[i].centroid(), colors[i]});
  RenderSettings settings;
  settings.sh_degree = 0;
  for (int i = 0; i < 6; ++i) {
    const double az = -std::numbers::pi / 2 + 0.35 * (i - 2.5);
    const Vec3 eye(2.5 * std::cos(az), 2.5 * std::sin(az), 0.4 + 0.1 * (i % 2));
    SfmView view;
    view.pose = CameraPose::look_at(eye, Vec3(0, 0, 0.05), Vec3::UnitZ());
    view.camera_id = 1;
    view.name = view_name(i);
    view.image = fs::path("images") / view.name;
    view.holdout = i == 5;
    scene.views.push_back(view);
    save_png(render(tris, Camera{intr, view.pose}, settings).image, dir / view.image);
  }
  save_native(scene, dir / "scene.txt");
  return scene;
}

}  // namespace trisplat
