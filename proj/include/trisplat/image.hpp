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

#ifndef TRISPLAT_IMAGE_HPP_
#define TRISPLAT_IMAGE_HPP_

#include <vector>

#include "trisplat/camera.hpp"

namespace trisplat {

// Row-major RGB image with 3 doubles per pixel.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, const Vec3& fill = Vec3::Zero());

  int num_pixels() const { return width * height; }
  Vec3 pixel(int i) const {
    const double* p = &rgb[3 * static_cast<size_t>(i)];
    return Vec3(p[0], p[1], p[2]);
  }
  Vec3 at(int x, int y) const {
    const double* p = &rgb[3 * (static_cast<size_t>(y) * width + x)];
    return Vec3(p[0], p[1], p[2]);
  }
  void set(int x, int y, const Vec3& c) {
    double* p = &rgb[3 * (static_cast<size_t>(y) * width + x)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  bool same_shape(const ImageBuffer& other) const {
    return width == other.width && height == other.height;
  }
};

}  // namespace trisplat

#endif  // TRISPLAT_IMAGE_HPP_
