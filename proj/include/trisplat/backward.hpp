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

#ifndef TRISPLAT_BACKWARD_HPP_
#define TRISPLAT_BACKWARD_HPP_

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "trisplat/render.hpp"
#include "trisplat/triangle.hpp"

namespace trisplat {

// Gradient of a scalar with respect to one triangle's 59 parameters, in the
// flat layout of parameter().
struct TriangleGradient {
  std::array<double, kParamsPerTriangle> values{};

  double& operator[](int k) { return values[k]; }
  double operator[](int k) const { return values[k]; }
  Eigen::Map<Vec3> vertex(int j) { return Eigen::Map<Vec3>(values.data() + 3 * j); }
  Eigen::Map<const Vec3> vertex(int j) const {
    return Eigen::Map<const Vec3>(values.data() + 3 * j);
  }
  double& opacity() { return values[9]; }
  double opacity() const { return values[9]; }
  double& sigma() { return values[10]; }
  double sigma() const { return values[10]; }
  Eigen::Map<Vec3> sh(int k) { return Eigen::Map<Vec3>(values.data() + 11 + 3 * k); }
  Eigen::Map<const Vec3> sh(int k) const {
    return Eigen::Map<const Vec3>(values.data() + 11 + 3 * k);
  }
  bool is_finite() const;
};

using GradientSet = std::vector<TriangleGradient>;

// dst += scale * src, element-wise.
void accumulate(GradientSet* dst, const GradientSet& src, double scale = 1.0);

// Upstream gradients of the loss with respect to render outputs.
struct UpstreamGradients {
  std::vector<double> d_image;   // 3 per pixel, required
  std::vector<double> d_weight;  // per fragment item (optional)
  std::vector<double> d_depth;   // per fragment item (optional)
};

// Chain rule from the upstream gradients to every triangle parameter. The
// scene must be the one `forward` was rendered from; a triangle list that
// does not match the scene fingerprint throws std::invalid_argument.
// Depth order and tile membership are treated as constants. Fragments whose
// alpha was clamped pass no gradient to opacity or the window.
GradientSet render_backward(const PreparedScene& scene,
                            std::span<const Triangle3D> triangles,
                            const RenderOutput& forward,
                            const UpstreamGradients& upstream);

// Convenience overload: prepares and renders internally.
GradientSet render_backward(std::span<const Triangle3D> triangles,
                            const Camera& camera,
                            const RenderSettings& settings,
                            std::span<const double> d_image);

// Scalar functional of a triangle list, e.g. a weighted pixel sum.
using SceneFunctional = std::function<double(std::span<const Triangle3D>)>;

// sum_i weights[i] * image[i] rendered with the serial reference renderer.
SceneFunctional weighted_image_functional(const Camera& camera,
                                          const RenderSettings& settings,
                                          std::vector<double> weights);

// Central difference (f(x + h) - f(x - h)) / 2h for one parameter.
double finite_difference(const SceneFunctional& f,
                         std::vector<Triangle3D> triangles, int triangle,
                         int param, double h);

// Step used by the oracle: 1e-5 scaled by the parameter magnitude, kept in
// [1e-5, 1e-3].
double finite_difference_step(double value);

}  // namespace trisplat

#endif  // TRISPLAT_BACKWARD_HPP_
