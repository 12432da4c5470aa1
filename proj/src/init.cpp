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

#include "trisplat/init.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "trisplat/sh.hpp"

namespace trisplat {
namespace {

// Uniform hash grid for nearest-neighbor queries.
class PointGrid {
 public:
  PointGrid(std::span<const Vec3> points, double cell) : points_(points), cell_(cell) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(coord(points[i]))].push_back(i);
  }

  // Sorted distances to the k nearest points other than `self`.
  std::vector<double> nearest(std::size_t self, int k) const {
    const Vec3& p = points_[self];
    const Eigen::Vector3i c = coord(p);
    std::vector<double> best;
    const int limit = static_cast<int>(points_.size()) - 1;
    const int want = std::min(k, limit);
    for (int ring = 0;; ++ring) {
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
            if (it == cells_.end()) continue;
            for (const std::size_t j : it->second) {
              if (j != self) best.push_back((points_[j] - p).norm());
            }
          }
        }
      }
      std::sort(best.begin(), best.end());
      if (static_cast<int>(best.size()) > want) best.resize(want);
      // Points beyond this ring are at least ring * cell away.
      if (static_cast<int>(best.size()) == want &&
          (want == 0 || best.back() <= ring * cell_)) {
        return best;
      }
    }
  }

 private:
  Eigen::Vector3i coord(const Vec3& p) const {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / cell_)),
                           static_cast<int>(std::floor(p.y() / cell_)),
                           static_cast<int>(std::floor(p.z() / cell_)));
  }
  static std::uint64_t key(const Eigen::Vector3i& c) {
    const auto u = [](int v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffff; };
    return u(c.x()) | (u(c.y()) << 21) | (u(c.z()) << 42);
  }

  std::span<const Vec3> points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

}  // namespace

void InitConfig::validate() const {
  if (!(k > 0.0)) throw std::invalid_argument("init k must be positive");
  if (knn < 1) throw std::invalid_argument("knn must be at least 1");
  if (!(init_opacity > 0.0 && init_opacity < 1.0)) {
    throw std::invalid_argument("init opacity must lie in (0, 1)");
  }
  if (!(init_sigma > 0.0)) throw std::invalid_argument("init sigma must be positive");
  if (!(min_angle_deg >= 0.0 && min_angle_deg < 60.0)) {
    throw std::invalid_argument("minimum angle must lie in [0, 60) degrees");
  }
}

std::vector<double> knn_mean_distance(std::span<const Vec3> points, int k) {
  std::vector<double> out(points.size(), 0.0);
  if (points.size() < 2) return out;
  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = std::max((hi - lo).maxCoeff(), 1e-9);
  // Roughly k points per cell for a uniform cloud; clamped to the grid key range.
  const double cell = std::max(extent * std::cbrt(static_cast<double>(k) / points.size()),
                               extent / 1.0e6);
  const PointGrid grid(points, cell);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::vector<double> d = grid.nearest(i, k);
    double sum = 0.0;
    for (double v : d) sum += v;
    out[i] = d.empty() ? 0.0 : sum / static_cast<double>(d.size());
  }
  return out;
}

double min_angle_deg(const Triangle3D& tri) {
  double smallest = 180.0;
  for (int i = 0; i < 3; ++i) {
    const Vec3 a = tri.vertices[(i + 1) % 3] - tri.vertices[i];
    const Vec3 b = tri.vertices[(i + 2) % 3] - tri.vertices[i];
    const double denom = a.norm() * b.norm();
    if (!(denom > 0.0)) return 0.0;
    const double c = std::clamp(a.dot(b) / denom, -1.0, 1.0);
    smallest = std::min(smallest, std::acos(c) * 180.0 / std::numbers::pi);
  }
  return smallest;
}

Bounds fallback_bounds(const SfmScene& scene) {
  if (scene.bounds) return *scene.bounds;
  Vec3 mean = Vec3::Zero();
  for (const SfmView& v : scene.views) mean += v.pose.center();
  mean /= static_cast<double>(scene.views.size());
  double spread = 0.0;
  for (const SfmView& v : scene.views) spread = std::max(spread, (v.pose.center() - mean).norm());
  const double depth = spread > 0.0 ? 2.0 * spread : 1.0;
  Bounds box{Vec3::Constant(std::numeric_limits<double>::infinity()),
             Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    const Camera cam = scene.camera(i);
    const CameraIntrinsics& in = cam.intrinsics;
    for (double z : {in.z_near, depth}) {
      for (double px : {0.0, static_cast<double>(in.width)}) {
        for (double py : {0.0, static_cast<double>(in.height)}) {
          const Vec3 c(z * (px - in.cx) / in.fx, z * (py - in.cy) / in.fy, z);
          const Vec3 w = cam.pose.rotation.transpose() * (c - cam.pose.translation);
          box.lo = box.lo.cwiseMin(w);
          box.hi = box.hi.cwiseMax(w);
        }
      }
    }
  }
  return box;
}

std::vector<SfmPoint> random_points(const Bounds& box, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SfmPoint> out(static_cast<std::size_t>(std::max(count, 0)));
  for (SfmPoint& p : out) {
    for (int c = 0; c < 3; ++c) p.position[c] = box.lo[c] + u(rng) * (box.hi[c] - box.lo[c]);
    p.rgb = Vec3(u(rng), u(rng), u(rng));
  }
  return out;
}

std::vector<Triangle3D> init_triangles(const SfmScene& scene, const InitConfig& cfg,
                                       std::mt19937_64& rng) {
  cfg.validate();
  std::vector<SfmPoint> points = scene.points;
  if (points.empty()) points = random_points(fallback_bounds(scene), cfg.fallback_points, rng);

  std::vector<Vec3> positions(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) positions[i] = points[i].position;
  std::vector<double> d = knn_mean_distance(positions, cfg.knn);
  // Coincident points would give zero-size triangles; borrow the cloud's mean.
  double mean = 0.0;
  int positive = 0;
  for (double v : d) {
    if (v > 0.0) {
      mean += v;
      ++positive;
    }
  }
  mean = positive ? mean / positive : 1.0;
  for (double& v : d)
    if (!(v > 0.0)) v = mean;

  std::vector<Triangle3D> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Triangle3D& t = out[i];
    const double radius = cfg.k * d[i];
    do {
      for (auto& v : t.vertices) v = points[i].position + radius * random_direction(rng);
    } while (min_angle_deg(t) < cfg.min_angle_deg);
    t.opacity = cfg.init_opacity;
    t.sigma = cfg.init_sigma;
    t.sh.fill(Vec3::Zero());
    t.sh[0] = rgb_to_sh_dc(points[i].rgb);
  }
  return out;
}

}  // namespace trisplat
