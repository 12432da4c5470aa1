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

// Finite-difference gradient check shared by the unit and acceptance suites.
#ifndef TRISPLAT_TESTS_GRADCHECK_HPP_
#define TRISPLAT_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "test_util.hpp"
#include "trisplat/backward.hpp"
#include "trisplat/render.hpp"

namespace trisplat::testing {

struct GradCheckStats {
  int checked = 0;
  int excluded = 0;
  double max_rel_error = 0.0;
  int worst_triangle = -1;
  int worst_param = -1;

  void merge(const GradCheckStats& o) {
    checked += o.checked;
    excluded += o.excluded;
    if (o.max_rel_error > max_rel_error) {
      max_rel_error = o.max_rel_error;
      worst_triangle = o.worst_triangle;
      worst_param = o.worst_param;
    }
  }
  double exclusion_rate() const {
    const int total = checked + excluded;
    return total ? static_cast<double>(excluded) / total : 0.0;
  }
};

inline double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Compares every parameter of every triangle against central differences of
// the functional sum(weights * image). Parameters whose +-h perturbation
// changes the discrete raster state are excluded.
inline GradCheckStats gradient_check(const std::vector<Triangle3D>& tris,
                                     const Camera& camera,
                                     const RenderSettings& settings,
                                     const std::vector<double>& weights,
                                     double abs_floor = 1e-6) {
  const GradientSet grad = render_backward(tris, camera, settings, weights);
  const SceneFunctional f = weighted_image_functional(camera, settings, weights);
  const std::uint64_t base = raster_state_signature(prepare_scene(tris, camera, settings));
  GradCheckStats stats;
  std::vector<Triangle3D> work = tris;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (int k = 0; k < kParamsPerTriangle; ++k) {
      const double x = parameter(tris[t], k);
      const double h = finite_difference_step(x);
      bool stable = true;
      for (double s : {-h, h}) {
        parameter(work[t], k) = x + s;
        stable = stable &&
                 raster_state_signature(prepare_scene(work, camera, settings)) == base;
      }
      parameter(work[t], k) = x;
      if (!stable) {
        ++stats.excluded;
        continue;
      }
      const double numeric = finite_difference(f, tris, static_cast<int>(t), k, h);
      const double err = relative_error(grad[t][k], numeric, abs_floor);
      ++stats.checked;
      if (err > stats.max_rel_error) {
        stats.max_rel_error = err;
        stats.worst_triangle = static_cast<int>(t);
        stats.worst_param = k;
      }
    }
  }
  return stats;
}

struct GradScene {
  std::vector<Triangle3D> triangles;
  Camera camera;
  std::vector<double> weights;
};

// 1-5 triangles, sigma in [0.5, 5], o in [0.1, 0.9], 8x8 to 32x32 images.
inline GradScene random_grad_scene(std::mt19937_64& rng) {
  GradScene s;
  const int size = 8 * std::uniform_int_distribution<int>(1, 4)(rng);
  const Vec3 eye = 3.0 * random_unit(rng);
  s.camera = make_camera(size, size, eye, Vec3::Zero(), uniform(rng, 0.8, 1.6));
  const int n = std::uniform_int_distribution<int>(1, 5)(rng);
  for (int i = 0; i < n; ++i) s.triangles.push_back(random_triangle(rng, 0.7, 0.5, 5.0, 0.1, 0.9));
  s.weights.resize(3 * static_cast<std::size_t>(size) * size);
  for (double& w : s.weights) w = uniform(rng, -1.0, 1.0);
  return s;
}

}  // namespace trisplat::testing

#endif  // TRISPLAT_TESTS_GRADCHECK_HPP_
