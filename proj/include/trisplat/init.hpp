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

#ifndef TRISPLAT_INIT_HPP_
#define TRISPLAT_INIT_HPP_

#include <random>
#include <span>
#include <vector>

#include "trisplat/scene.hpp"
#include "trisplat/triangle.hpp"

namespace trisplat {

struct InitConfig {
  double k = 2.2;
  double init_opacity = 0.28;
  double init_sigma = 1.16;
  int knn = 3;
  double min_angle_deg = 10.0;
  int fallback_points = 10000;

  void validate() const;
};

// Mean distance from each point to its `k` nearest other points (all of
// them when fewer exist; 0 for a lone point).
std::vector<double> knn_mean_distance(std::span<const Vec3> points, int k);

double min_angle_deg(const Triangle3D& tri);

// Box used for random init when the scene has no points: the scene's own
// bounds if given, else the union of the view frusta cut at a depth of twice
// the camera spread.
Bounds fallback_bounds(const SfmScene& scene);

std::vector<SfmPoint> random_points(const Bounds& box, int count, std::mt19937_64& rng);

std::vector<Triangle3D> init_triangles(const SfmScene& scene, const InitConfig& cfg,
                                       std::mt19937_64& rng);

}  // namespace trisplat

#endif  // TRISPLAT_INIT_HPP_
