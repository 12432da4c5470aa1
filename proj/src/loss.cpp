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

#include "trisplat/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace trisplat {
namespace {

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> g;
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable Gaussian filter of one plane with zero padding, output same size.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  static const auto taps = gaussian_taps();
  const int half = kSsimWindow / 2;
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) s += taps[k + half] * in[y * w + xx];
      }
      tmp[y * w + x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) s += taps[k + half] * tmp[yy * w + x];
      }
      out[y * w + x] = s;
    }
  }
  return out;
}

void check_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b) || a.rgb.size() != b.rgb.size()) {
    throw std::invalid_argument("image dimensions differ");
  }
}

SsimResult ssim_impl(const ImageBuffer& a, const ImageBuffer& b, bool grad) {
  check_same_shape(a, b);
  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  SsimResult result;
  if (n == 0) return result;
  if (grad) result.d_a.assign(a.rgb.size(), 0.0);
  const double norm = 1.0 / (3.0 * static_cast<double>(n));

  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.rgb[3 * i + c];
      y[i] = b.rgb[3 * i + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mu_x = blur(x, w, h), mu_y = blur(y, w, h);
    const auto e_xx = blur(xx, w, h), e_yy = blur(yy, w, h),
               e_xy = blur(xy, w, h);
    std::vector<double> d_mu, d_exx, d_exy;
    if (grad) {
      d_mu.resize(n);
      d_exx.resize(n);
      d_exy.resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double mx = mu_x[i], my = mu_y[i];
      const double n1 = 2.0 * mx * my + kSsimC1;
      const double n2 = 2.0 * (e_xy[i] - mx * my) + kSsimC2;
      const double d1 = mx * mx + my * my + kSsimC1;
      const double d2 = e_xx[i] - mx * mx + e_yy[i] - my * my + kSsimC2;
      const double s = (n1 * n2) / (d1 * d2);
      result.value += s * norm;
      if (grad) {
        d_mu[i] = s * (2.0 * my / n1 - 2.0 * my / n2 - 2.0 * mx / d1 +
                       2.0 * mx / d2);
        d_exx[i] = -s / d2;
        d_exy[i] = 2.0 * s / n2;
      }
    }
    if (grad) {
      const auto g_mu = blur(d_mu, w, h), g_xx = blur(d_exx, w, h),
                 g_xy = blur(d_exy, w, h);
      for (std::size_t i = 0; i < n; ++i) {
        result.d_a[3 * i + c] =
            norm * (g_mu[i] + 2.0 * x[i] * g_xx[i] + y[i] * g_xy[i]);
      }
    }
  }
  return result;
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_dssim >= 0.0 && lambda_dssim <= 1.0)) {
    throw std::invalid_argument("lambda_dssim must lie in [0, 1]");
  }
  if (!(beta_opacity >= 0.0) || !(beta_distortion >= 0.0) ||
      !(beta_normal >= 0.0) || !(beta_size >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  return ssim_impl(a, b, false).value;
}

SsimResult ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b) {
  return ssim_impl(a, b, true);
}

PhotometricLoss photometric_loss(const ImageBuffer& rendered,
                                 const ImageBuffer& target, double lambda) {
  check_same_shape(rendered, target);
  PhotometricLoss out;
  const std::size_t n = rendered.rgb.size();
  out.d_image.assign(n, 0.0);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = rendered.rgb[i] - target.rgb[i];
    out.l1 += std::abs(d) * inv_n;
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    out.d_image[i] = (1.0 - lambda) * sign * inv_n;
  }
  if (lambda > 0.0) {
    const SsimResult s = ssim_with_gradient(rendered, target);
    out.dssim = 0.5 * (1.0 - s.value);
    for (std::size_t i = 0; i < n; ++i) out.d_image[i] -= 0.5 * lambda * s.d_a[i];
  } else {
    out.dssim = 0.5 * (1.0 - ssim(rendered, target));
  }
  out.value = (1.0 - lambda) * out.l1 + lambda * out.dssim;
  return out;
}

ScalarLoss opacity_loss(std::span<const double> opacities) {
  ScalarLoss out;
  if (opacities.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(opacities.size());
  out.value = std::accumulate(opacities.begin(), opacities.end(), 0.0) * inv_n;
  out.grad.assign(opacities.size(), inv_n);
  return out;
}

FragmentLoss distortion_loss(const FragmentBuffer& fragments, int num_pixels) {
  FragmentLoss out;
  out.d_weight.assign(fragments.items.size(), 0.0);
  out.d_depth.assign(fragments.items.size(), 0.0);
  if (fragments.empty() || num_pixels <= 0) return out;
  const double scale = 2.0 / num_pixels;
  std::vector<std::size_t> order;
  for (int p = 0; p < num_pixels; ++p) {
    const std::size_t base = fragments.offsets[p];
    const std::size_t count = fragments.offsets[p + 1] - base;
    if (count < 2) continue;
    const Fragment* f = fragments.items.data() + base;
    order.resize(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [f](std::size_t a, std::size_t b) { return f[a].depth < f[b].depth; });
    double total_w = 0.0, total_wz = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      total_w += f[i].weight;
      total_wz += f[i].weight * f[i].depth;
    }
    // Walk groups of equal depth; below_* hold sums over strictly smaller
    // depths.
    double below_w = 0.0, below_wz = 0.0, pixel_value = 0.0;
    std::size_t g0 = 0;
    while (g0 < count) {
      std::size_t g1 = g0 + 1;
      const double z = f[order[g0]].depth;
      while (g1 < count && f[order[g1]].depth == z) ++g1;
      double group_w = 0.0;
      for (std::size_t k = g0; k < g1; ++k) group_w += f[order[k]].weight;
      const double above_w = total_w - below_w - group_w;
      const double above_wz = total_wz - below_wz - group_w * z;
      // sum_j w_j |z - z_j| for any member of the group.
      const double spread = (z * below_w - below_wz) + (above_wz - z * above_w);
      for (std::size_t k = g0; k < g1; ++k) {
        const std::size_t i = order[k];
        pixel_value += f[i].weight * spread;
        out.d_weight[base + i] = scale * spread;
        out.d_depth[base + i] = scale * f[i].weight * (below_w - above_w);
      }
      below_w += group_w;
      below_wz += group_w * z;
      g0 = g1;
    }
    out.value += pixel_value / num_pixels;
  }
  return out;
}

std::vector<Vec3> depth_normals(std::span<const double> depth,
                                const CameraIntrinsics& intr) {
  const int w = intr.width, h = intr.height;
  std::vector<Vec3> normals(static_cast<std::size_t>(w) * h, Vec3::Zero());
  if (depth.size() != normals.size()) {
    throw std::invalid_argument("depth map does not match the camera");
  }
  auto point = [&](int x, int y) -> Vec3 {
    return depth[y * w + x] * pixel_ray(intr, pixel_center(x, y));
  };
  auto valid = [&](int x, int y) {
    return x >= 0 && x < w && y >= 0 && y < h && depth[y * w + x] > 0.0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid(x, y)) continue;
      const Vec3 center = point(x, y);
      auto sample = [&](int xx, int yy) -> Vec3 {
        return valid(xx, yy) ? point(xx, yy) : center;
      };
      const Vec3 dx = 0.5 * (sample(x + 1, y) - sample(x - 1, y));
      const Vec3 dy = 0.5 * (sample(x, y + 1) - sample(x, y - 1));
      Vec3 n = dx.cross(dy);
      const double len = n.norm();
      if (!(len > 1e-12 * center.squaredNorm())) continue;
      n /= len;
      if (n.dot(center) > 0.0) n = -n;
      normals[y * w + x] = n;
    }
  }
  return normals;
}

Vec3 facing_normal(const Triangle3D& tri, const Vec3& eye) {
  const Vec3 c = tri.cross();
  const double len = c.norm();
  if (!(len > 0.0)) return Vec3::Zero();
  Vec3 n = c / len;
  if (n.dot(tri.centroid() - eye) > 0.0) n = -n;
  return n;
}

std::array<Vec3, 3> facing_normal_backward(const Triangle3D& tri,
                                           const Vec3& eye,
                                           const Vec3& d_normal) {
  std::array<Vec3, 3> out{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  const Vec3 e1 = tri.vertices[1] - tri.vertices[0];
  const Vec3 e2 = tri.vertices[2] - tri.vertices[0];
  const Vec3 c = e1.cross(e2);
  const double len = c.norm();
  if (!(len > 0.0)) return out;
  const Vec3 n_hat = c / len;
  const double sign = n_hat.dot(tri.centroid() - eye) > 0.0 ? -1.0 : 1.0;
  const Vec3 g = sign * d_normal;
  const Vec3 d_cross = (g - n_hat * n_hat.dot(g)) / len;
  const Vec3 d_e1 = e2.cross(d_cross);
  const Vec3 d_e2 = d_cross.cross(e1);
  out[0] = -d_e1 - d_e2;
  out[1] = d_e1;
  out[2] = d_e2;
  return out;
}

NormalLoss normal_loss(std::span<const Triangle3D> triangles,
                       const FragmentBuffer& fragments,
                       std::span<const double> depth, const Camera& camera) {
  NormalLoss out;
  out.d_weight.assign(fragments.items.size(), 0.0);
  out.d_params.assign(triangles.size(), TriangleGradient{});
  if (fragments.empty()) return out;
  const CameraIntrinsics& intr = camera.intrinsics;
  const Mat3& rot = camera.pose.rotation;
  const Vec3 eye = camera.pose.center();
  const std::vector<Vec3> pixel_normals = depth_normals(depth, intr);

  std::vector<Vec3> tri_normals(triangles.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    tri_normals[i] = rot * facing_normal(triangles[i], eye);
  }

  std::size_t count = 0;
  for (int p = 0; p < intr.num_pixels(); ++p) {
    if (pixel_normals[p].isZero()) continue;
    count += fragments.offsets[p + 1] - fragments.offsets[p];
  }
  if (count == 0) return out;
  const double inv = 1.0 / static_cast<double>(count);

  std::vector<Vec3> d_normal(triangles.size(), Vec3::Zero());
  for (int p = 0; p < intr.num_pixels(); ++p) {
    const Vec3& big_n = pixel_normals[p];
    if (big_n.isZero()) continue;
    for (std::size_t k = fragments.offsets[p]; k < fragments.offsets[p + 1]; ++k) {
      const Fragment& f = fragments.items[k];
      const double dot = tri_normals[f.triangle].dot(big_n);
      out.value += f.weight * (1.0 - dot) * inv;
      out.d_weight[k] = (1.0 - dot) * inv;
      d_normal[f.triangle] -= f.weight * inv * big_n;
    }
  }
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    if (d_normal[i].isZero()) continue;
    const auto dv = facing_normal_backward(triangles[i], eye,
                                           rot.transpose() * d_normal[i]);
    for (int j = 0; j < 3; ++j) out.d_params[i].vertex(j) += dv[j];
  }
  return out;
}

SizeLoss size_loss(const Triangle3D& tri) {
  SizeLoss out;
  const Vec3 e1 = tri.vertices[1] - tri.vertices[0];
  const Vec3 e2 = tri.vertices[2] - tri.vertices[0];
  const Vec3 c = e1.cross(e2);
  const double len = c.norm();
  if (!(len >= kSizeLossFloor)) {
    out.value = 2.0 / kSizeLossFloor;
    return out;
  }
  out.value = 2.0 / len;
  const Vec3 d_cross = -2.0 * c / (len * len * len);
  const Vec3 d_e1 = e2.cross(d_cross);
  const Vec3 d_e2 = d_cross.cross(e1);
  out.d_vertices = {Vec3(-d_e1 - d_e2), d_e1, d_e2};
  return out;
}

double total_loss(const LossTerms& t, const LossWeights& w) {
  return (1.0 - w.lambda_dssim) * t.l1 + w.lambda_dssim * t.dssim +
         w.beta_opacity * t.opacity + w.beta_distortion * t.distortion +
         w.beta_normal * t.normal + w.beta_size * t.size;
}

Objective evaluate_objective(std::span<const Triangle3D> triangles,
                             const PreparedScene& scene,
                             const RenderOutput& forward,
                             const ImageBuffer& target,
                             const LossWeights& weights,
                             const ObjectiveOptions& options) {
  weights.validate();
  Objective obj;
  const std::size_t n = triangles.size();
  obj.direct.assign(n, TriangleGradient{});

  PhotometricLoss photo = photometric_loss(forward.image, target, weights.lambda_dssim);
  obj.terms.l1 = photo.l1;
  obj.terms.dssim = photo.dssim;
  obj.upstream.d_image = std::move(photo.d_image);

  if (n > 0) {
    const double inv_n = 1.0 / static_cast<double>(n);
    double opacity_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      opacity_sum += triangles[i].opacity;
      obj.direct[i].opacity() += weights.beta_opacity * inv_n;
      if (weights.beta_size > 0.0) {
        const SizeLoss s = size_loss(triangles[i]);
        obj.terms.size += s.value * inv_n;
        for (int j = 0; j < 3; ++j) {
          obj.direct[i].vertex(j) += weights.beta_size * inv_n * s.d_vertices[j];
        }
      }
    }
    obj.terms.opacity = opacity_sum * inv_n;
  }

  const bool fragments = !forward.fragments.empty();
  if ((options.distortion || options.normal) && !fragments) {
    throw std::invalid_argument(
        "distortion and normal losses need a render with collected fragments");
  }
  if (options.distortion && weights.beta_distortion > 0.0) {
    FragmentLoss d = distortion_loss(forward.fragments,
                                     scene.camera.intrinsics.num_pixels());
    obj.terms.distortion = d.value;
    for (double& g : d.d_weight) g *= weights.beta_distortion;
    for (double& g : d.d_depth) g *= weights.beta_distortion;
    obj.upstream.d_weight = std::move(d.d_weight);
    obj.upstream.d_depth = std::move(d.d_depth);
  }
  if (options.normal && weights.beta_normal > 0.0) {
    NormalLoss nl = normal_loss(triangles, forward.fragments, forward.depth, scene.camera);
    obj.terms.normal = nl.value;
    if (obj.upstream.d_weight.empty()) {
      obj.upstream.d_weight.assign(nl.d_weight.size(), 0.0);
    }
    for (std::size_t k = 0; k < nl.d_weight.size(); ++k) {
      obj.upstream.d_weight[k] += weights.beta_normal * nl.d_weight[k];
    }
    accumulate(&obj.direct, nl.d_params, weights.beta_normal);
  }
  obj.total = total_loss(obj.terms, weights);
  return obj;
}

}  // namespace trisplat
