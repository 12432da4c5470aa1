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

#include "trisplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "trisplat/loss.hpp"

namespace trisplat {

std::uint8_t quantize_unit(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5));
}

void save_png(const ImageBuffer& image, const std::filesystem::path& path) {
  if (image.width <= 0 || image.height <= 0) {
    throw std::invalid_argument("cannot save an empty image");
  }
  std::vector<std::uint8_t> bytes(image.rgb.size());
  std::transform(image.rgb.begin(), image.rgb.end(), bytes.begin(), quantize_unit);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write " + path.string() + ": " + png.message);
  }
}

ImageBuffer load_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw std::runtime_error("cannot read " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("cannot decode " + path.string() + ": " + png.message);
  }
  ImageBuffer image(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < bytes.size(); ++i) image.rgb[i] = bytes[i] / 255.0;
  return image;
}

double psnr(const ImageBuffer& rendered, const ImageBuffer& target) {
  if (!rendered.same_shape(target)) throw std::invalid_argument("image size mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < rendered.rgb.size(); ++i) {
    const double d = rendered.rgb[i] - target.rgb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(rendered.rgb.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

ImageMetrics compute_metrics(const ImageBuffer& rendered, const ImageBuffer& target) {
  return {psnr(rendered, target), ssim(rendered, target)};
}

}  // namespace trisplat
