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

#include "trisplat/sh.hpp"

#include <algorithm>

namespace trisplat {
namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792,
                          0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554,
                          -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

}  // namespace

ShBasis sh_basis(const Vec3& dir, int degree) {
  ShBasis y;
  y.fill(0.0);
  const double x = dir.x(), yy = dir.y(), z = dir.z();
  y[0] = kShC0;
  if (degree < 1) return y;
  y[1] = -kC1 * yy;
  y[2] = kC1 * z;
  y[3] = -kC1 * x;
  if (degree < 2) return y;
  const double xx = x * x, y2 = yy * yy, zz = z * z;
  y[4] = kC2[0] * x * yy;
  y[5] = kC2[1] * yy * z;
  y[6] = kC2[2] * (2.0 * zz - xx - y2);
  y[7] = kC2[3] * x * z;
  y[8] = kC2[4] * (xx - y2);
  if (degree < 3) return y;
  y[9] = kC3[0] * yy * (3.0 * xx - y2);
  y[10] = kC3[1] * x * yy * z;
  y[11] = kC3[2] * yy * (4.0 * zz - xx - y2);
  y[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * y2);
  y[13] = kC3[4] * x * (4.0 * zz - xx - y2);
  y[14] = kC3[5] * z * (xx - y2);
  y[15] = kC3[6] * x * (xx - 3.0 * y2);
  return y;
}

void sh_basis_with_gradient(const Vec3& dir, int degree, ShBasis* values,
                            std::array<Vec3, kShCoeffCount>* gradients) {
  ShBasis& y = *values;
  y = sh_basis(dir, degree);
  if (!gradients) return;
  std::array<Vec3, kShCoeffCount>& g = *gradients;
  g.fill(Vec3::Zero());

  const double x = dir.x(), yy = dir.y(), z = dir.z();
  if (degree < 1) return;

  g[1] = Vec3(0, -kC1, 0);
  g[2] = Vec3(0, 0, kC1);
  g[3] = Vec3(-kC1, 0, 0);
  if (degree < 2) return;

  const double xx = x * x, y2 = yy * yy, zz = z * z;
  g[4] = kC2[0] * Vec3(yy, x, 0);
  g[5] = kC2[1] * Vec3(0, z, yy);
  g[6] = kC2[2] * Vec3(-2 * x, -2 * yy, 4 * z);
  g[7] = kC2[3] * Vec3(z, 0, x);
  g[8] = kC2[4] * Vec3(2 * x, -2 * yy, 0);
  if (degree < 3) return;

  g[9] = kC3[0] * Vec3(6 * x * yy, 3 * xx - 3 * y2, 0);
  g[10] = kC3[1] * Vec3(yy * z, x * z, x * yy);
  g[11] = kC3[2] * Vec3(-2 * x * yy, 4 * zz - xx - 3 * y2, 8 * yy * z);
  g[12] = kC3[3] * Vec3(-6 * x * z, -6 * yy * z, 6 * zz - 3 * xx - 3 * y2);
  g[13] = kC3[4] * Vec3(4 * zz - 3 * xx - y2, -2 * x * yy, 8 * x * z);
  g[14] = kC3[5] * Vec3(2 * x * z, -2 * yy * z, xx - y2);
  g[15] = kC3[6] * Vec3(3 * xx - 3 * y2, -6 * x * yy, 0);
}

ShColor eval_sh_color(const ShCoeffs& coeffs, const Vec3& dir, int degree) {
  degree = std::clamp(degree, 0, kMaxShDegree);
  const ShBasis y = sh_basis(dir, degree);
  const int count = (degree + 1) * (degree + 1);
  Vec3 raw = Vec3::Constant(0.5);
  for (int k = 0; k < count; ++k) raw += y[k] * coeffs[k];
  ShColor out;
  for (int c = 0; c < 3; ++c) {
    out.live[c] = raw[c] >= 0.0 && raw[c] <= 1.0;
    out.rgb[c] = std::clamp(raw[c], 0.0, 1.0);
  }
  return out;
}

Vec3 dc_color(const ShCoeffs& coeffs) {
  return (kShC0 * coeffs[0] + Vec3::Constant(0.5)).cwiseMax(0.0).cwiseMin(1.0);
}

Vec3 rgb_to_sh_dc(const Vec3& rgb) {
  return (rgb - Vec3::Constant(0.5)) / kShC0;
}

}  // namespace trisplat
