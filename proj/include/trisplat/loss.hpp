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

#ifndef TRISPLAT_LOSS_HPP_
#define TRISPLAT_LOSS_HPP_

#include <array>
#include <span>
#include <vector>

#include "trisplat/backward.hpp"
#include "trisplat/image.hpp"
#include "trisplat/render.hpp"
#include "trisplat/triangle.hpp"

namespace trisplat {

struct LossWeights {
  double lambda_dssim = 0.2;
  double beta_opacity = 0.0055;
  // Distortion runs on camera-space depth; larger weights wash out held-out
  // detail at the default iteration counts.
  double beta_distortion = 0.1;
  double beta_normal = 0.0001;
  double beta_size = 1e-8;

  void validate() const;
};

// SSIM settings: 11x11 Gaussian window, sigma 1.5, zero padding, constants
// (0.01)^2 and (0.03)^2 for unit dynamic range. Averaged over pixels and
// channels.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct SsimResult {
  double value = 0.0;
  std::vector<double> d_a;  // d(mean SSIM)/d(a), same layout as a.rgb
};
SsimResult ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b);

struct PhotometricLoss {
  double value = 0.0;  // (1 - lambda) L1 + lambda D-SSIM
  double l1 = 0.0;
  double dssim = 0.0;  // (1 - SSIM) / 2
  std::vector<double> d_image;
};

// Throws std::invalid_argument on a size mismatch.
PhotometricLoss photometric_loss(const ImageBuffer& rendered,
                                 const ImageBuffer& target, double lambda);

struct ScalarLoss {
  double value = 0.0;
  std::vector<double> grad;
};

// Mean opacity.
ScalarLoss opacity_loss(std::span<const double> opacities);

struct FragmentLoss {
  double value = 0.0;
  std::vector<double> d_weight;  // aligned with FragmentBuffer::items
  std::vector<double> d_depth;
};

// Mean over pixels of sum_{i,j} w_i w_j |z_i - z_j|.
FragmentLoss distortion_loss(const FragmentBuffer& fragments, int num_pixels);

// Camera-space unit normal per pixel from central differences of the depth
// map. Pixels without depth, or whose neighborhood is flat in one direction,
// get a zero vector.
std::vector<Vec3> depth_normals(std::span<const double> depth,
                                const CameraIntrinsics& intr);

struct NormalLoss {
  double value = 0.0;
  std::vector<double> d_weight;  // aligned with FragmentBuffer::items
  GradientSet d_params;          // vertex gradients through the normals
};

// Mean over fragments of w (1 - n . N): n is the camera-facing unit normal of
// the fragment's triangle, N the depth-map normal at the pixel (held
// constant).
NormalLoss normal_loss(std::span<const Triangle3D> triangles,
                       const FragmentBuffer& fragments,
                       std::span<const double> depth, const Camera& camera);

// Below this cross-product norm the size loss stops growing.
inline constexpr double kSizeLossFloor = 1e-8;

struct SizeLoss {
  double value = 0.0;
  std::array<Vec3, 3> d_vertices{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

// 2 / ||(v1 - v0) x (v2 - v0)||.
SizeLoss size_loss(const Triangle3D& tri);

struct LossTerms {
  double l1 = 0.0;
  double dssim = 0.0;
  double opacity = 0.0;
  double distortion = 0.0;
  double normal = 0.0;
  double size = 0.0;
};

// (1 - lambda) L1 + lambda D-SSIM + b1 Lo + b2 Ld + b3 Ln + b4 Ls.
double total_loss(const LossTerms& terms, const LossWeights& weights);

// Which regularizers take part in one evaluation.
struct ObjectiveOptions {
  bool distortion = false;
  bool normal = false;
};

struct Objective {
  double total = 0.0;
  LossTerms terms;
  UpstreamGradients upstream;  // for render_backward
  GradientSet direct;          // opacity, size and normal terms
};

// Evaluates every active term on one rendered view and assembles the
// weighted gradients. Fragment terms need a forward pass that collected
// fragments.
Objective evaluate_objective(std::span<const Triangle3D> triangles,
                             const PreparedScene& scene,
                             const RenderOutput& forward,
                             const ImageBuffer& target,
                             const LossWeights& weights,
                             const ObjectiveOptions& options);

// Camera-facing unit normal of a triangle and the map from a gradient on
// that normal to vertex gradients.
Vec3 facing_normal(const Triangle3D& tri, const Vec3& eye);
std::array<Vec3, 3> facing_normal_backward(const Triangle3D& tri,
                                           const Vec3& eye, const Vec3& d_normal);

}  // namespace trisplat

#endif  // TRISPLAT_LOSS_HPP_
