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

#ifndef TRISPLAT_IMAGE_IO_HPP_
#define TRISPLAT_IMAGE_IO_HPP_

#include <cstdint>
#include <filesystem>

#include "trisplat/image.hpp"

namespace trisplat {

// round(255 * clamp(v, 0, 1)), halves rounded up.
std::uint8_t quantize_unit(double v);

// 8-bit RGB PNG.
void save_png(const ImageBuffer& image, const std::filesystem::path& path);
ImageBuffer load_png(const std::filesystem::path& path);

struct ImageMetrics {
  double psnr = 0.0;  // dB, capped at kPsnrCap
  double ssim = 0.0;
};

inline constexpr double kPsnrCap = 100.0;

double psnr(const ImageBuffer& rendered, const ImageBuffer& target);
ImageMetrics compute_metrics(const ImageBuffer& rendered, const ImageBuffer& target);

}  // namespace trisplat

#endif  // TRISPLAT_IMAGE_IO_HPP_
