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

#ifndef TRISPLAT_TRIANGLE_HPP_
#define TRISPLAT_TRIANGLE_HPP_

#include <array>
#include <cstddef>

#include "trisplat/camera.hpp"

namespace trisplat {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kShCoeffCount = (kMaxShDegree + 1) * (kMaxShDegree + 1);

// Spherical-harmonic color: one RGB triple per basis function, degree <= 3.
using ShCoeffs = std::array<Vec3, kShCoeffCount>;

inline constexpr int kParamsPerTriangle = 9 + 1 + 1 + 3 * kShCoeffCount;
static_assert(kParamsPerTriangle == 59);

// One primitive of the soup. Opacity lives in (0, 1) during optimization;
// solid export triangles carry opacity exactly 1.
struct Triangle3D {
  std::array<Vec3, 3> vertices{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  double opacity = 0.5;
  double sigma = 1.0;
  ShCoeffs sh{};

  Triangle3D() { sh.fill(Vec3::Zero()); }

  Vec3 centroid() const {
    return (vertices[0] + vertices[1] + vertices[2]) / 3.0;
  }
  // (v1 - v0) x (v2 - v0); its norm is twice the area.
  Vec3 cross() const {
    return (vertices[1] - vertices[0]).cross(vertices[2] - vertices[0]);
  }
  double area() const { return 0.5 * cross().norm(); }
  bool is_finite() const;
};

// Flat parameter access in the fixed layout
// [v0.xyz, v1.xyz, v2.xyz, opacity, sigma, sh[0].rgb, ..., sh[15].rgb].
double& parameter(Triangle3D& tri, int index);
double parameter(const Triangle3D& tri, int index);

enum class ParamGroup { kVertex, kOpacity, kSigma, kShDc, kShRest };
ParamGroup parameter_group(int index);

}  // namespace trisplat

#endif  // TRISPLAT_TRIANGLE_HPP_
