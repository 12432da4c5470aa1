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

#ifndef TRISPLAT_SH_HPP_
#define TRISPLAT_SH_HPP_

#include <array>

#include "trisplat/triangle.hpp"

namespace trisplat {

// Real SH basis (Condon-Shortley phase, the usual splatting convention).
inline constexpr double kShC0 = 0.28209479177387814;

using ShBasis = std::array<double, kShCoeffCount>;

// Basis values Y_k(dir) for k < (degree + 1)^2; higher entries are zero.
ShBasis sh_basis(const Vec3& dir, int degree);

// Basis values and their partial derivatives with respect to the three
// (unconstrained) components of dir.
void sh_basis_with_gradient(const Vec3& dir, int degree, ShBasis* values,
                            std::array<Vec3, kShCoeffCount>* gradients);

struct ShColor {
  Vec3 rgb;                  // clamped to [0, 1]
  std::array<bool, 3> live;  // channel was not clamped
};

// clamp(sum_k coeffs[k] * Y_k(dir) + 0.5, 0, 1). dir must be unit length.
ShColor eval_sh_color(const ShCoeffs& coeffs, const Vec3& dir, int degree);

inline Vec3 eval_color(const ShCoeffs& coeffs, const Vec3& dir, int degree) {
  return eval_sh_color(coeffs, dir, degree).rgb;
}

// View-independent base color (degree 0).
Vec3 dc_color(const ShCoeffs& coeffs);

// DC coefficient reproducing `rgb` under the +0.5 offset convention.
Vec3 rgb_to_sh_dc(const Vec3& rgb);

}  // namespace trisplat

#endif  // TRISPLAT_SH_HPP_
