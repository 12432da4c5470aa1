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

#include "trisplat/triangle.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace trisplat {

bool Triangle3D::is_finite() const {
  // x * 0 is 0 for finite x and NaN otherwise.
  static_assert(sizeof(Triangle3D) == kParamsPerTriangle * sizeof(double));
  double p[kParamsPerTriangle];
  std::memcpy(p, this, sizeof(p));
  double probe = 0.0;
  for (const double v : p) probe += v * 0.0;
  return probe == 0.0;
}

double& parameter(Triangle3D& tri, int index) {
  if (index < 0 || index >= kParamsPerTriangle) {
    throw std::out_of_range("triangle parameter index out of range");
  }
  if (index < 9) return tri.vertices[index / 3][index % 3];
  if (index == 9) return tri.opacity;
  if (index == 10) return tri.sigma;
  const int k = index - 11;
  return tri.sh[k / 3][k % 3];
}

double parameter(const Triangle3D& tri, int index) {
  return parameter(const_cast<Triangle3D&>(tri), index);
}

ParamGroup parameter_group(int index) {
  if (index < 9) return ParamGroup::kVertex;
  if (index == 9) return ParamGroup::kOpacity;
  if (index == 10) return ParamGroup::kSigma;
  return index < 14 ? ParamGroup::kShDc : ParamGroup::kShRest;
}

}  // namespace trisplat
