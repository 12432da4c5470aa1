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

#include "trisplat/backward.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "trisplat/sh.hpp"

namespace trisplat {
namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Per-splat partial sums gathered over pixels. Edge-line gradients are
// affine in the pixel position, so only sum(g) and sum(g * p) per edge are
// needed to recover the vertex gradients afterwards.
struct SplatAccum {
  std::array<double, 3> edge_g{};
  std::array<Vec2, 3> edge_gp{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
  double g_phi_s = 0.0;
  double g_opacity = 0.0;
  double g_sigma = 0.0;
  Vec3 g_color = Vec3::Zero();
  std::array<Vec3, 3> g_camera{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};

  void add(const SplatAccum& o) {
    for (int k = 0; k < 3; ++k) {
      edge_g[k] += o.edge_g[k];
      edge_gp[k] += o.edge_gp[k];
      g_camera[k] += o.g_camera[k];
    }
    g_phi_s += o.g_phi_s;
    g_opacity += o.g_opacity;
    g_sigma += o.g_sigma;
    g_color += o.g_color;
  }
};

struct FragmentRecord {
  std::uint32_t splat;
  WindowSample window;
  double alpha;
  double transmittance;  // before this fragment
  bool clamped;
};

// d(inradius)/dq for the three screen vertices.
std::array<Vec2, 3> inradius_gradient(const std::array<Vec2, 3>& q) {
  const Vec2 u = q[1] - q[0];
  const Vec2 v = q[2] - q[0];
  const double twice_area = cross2(u, v);
  const double sign = twice_area >= 0.0 ? 1.0 : -1.0;
  const double l01 = u.norm(), l12 = (q[2] - q[1]).norm(), l20 = v.norm();
  const double perimeter = l01 + l12 + l20;
  const double r = std::abs(twice_area) / perimeter;

  const Vec2 d_du(v.y(), -v.x());
  const Vec2 d_dv(-u.y(), u.x());
  const std::array<Vec2, 3> d_area{Vec2(-d_du - d_dv), d_du, d_dv};
  const Vec2 e01 = (q[0] - q[1]) / l01;
  const Vec2 e12 = (q[1] - q[2]) / l12;
  const Vec2 e20 = (q[2] - q[0]) / l20;
  const std::array<Vec2, 3> d_perimeter{Vec2(e01 - e20), Vec2(e12 - e01),
                                        Vec2(e20 - e12)};
  std::array<Vec2, 3> out;
  for (int j = 0; j < 3; ++j) {
    out[j] = (sign * d_area[j] - r * d_perimeter[j]) / perimeter;
  }
  return out;
}

void splat_to_triangle(const PreparedScene& scene, const Triangle3D& tri,
                       const Splat& s, const SplatAccum& acc,
                       TriangleGradient* grad) {
  const ProjectedTriangle& proj = s.proj;
  std::array<Vec2, 3> dq{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};

  for (int k = 0; k < 3; ++k) {
    const double g = acc.edge_g[k];
    const Vec2& gp = acc.edge_gp[k];
    if (g == 0.0 && gp.isZero()) continue;
    const Vec2& a = proj.q[k];
    const Vec2& b = proj.q[(k + 1) % 3];
    const Vec2 e = b - a;
    const double len = e.norm();
    const Vec2 e_hat = e / len;
    const Vec2& n = proj.normals[k];
    const double orient = n.dot(Vec2(e.y(), -e.x())) >= 0.0 ? 1.0 : -1.0;
    const Vec2 u = gp - g * a;
    const double sum_l = n.dot(gp) + proj.offsets[k] * g;
    const Vec2 gb = (orient * Vec2(-u.y(), u.x()) - sum_l * e_hat) / len;
    dq[(k + 1) % 3] += gb;
    dq[k] += -gb - g * n;
  }
  if (acc.g_phi_s != 0.0) {
    const auto dr = inradius_gradient(proj.q);
    for (int j = 0; j < 3; ++j) dq[j] -= acc.g_phi_s * dr[j];
  }

  const CameraIntrinsics& intr = scene.camera.intrinsics;
  const Mat3& rot = scene.camera.pose.rotation;
  for (int j = 0; j < 3; ++j) {
    const Vec3& c = s.camera_vertices[j];
    const double iz = 1.0 / c.z();
    Vec3 g_cam = acc.g_camera[j];
    g_cam.x() += intr.fx * iz * dq[j].x();
    g_cam.y() += intr.fy * iz * dq[j].y();
    g_cam.z() -= (intr.fx * c.x() * dq[j].x() + intr.fy * c.y() * dq[j].y()) *
                 iz * iz;
    grad->vertex(j) += rot.transpose() * g_cam;
  }

  grad->opacity() += acc.g_opacity;
  grad->sigma() += acc.g_sigma;

  Vec3 d_raw = acc.g_color;
  for (int c = 0; c < 3; ++c) {
    if (!s.color_live[c]) d_raw[c] = 0.0;
  }
  if (!d_raw.isZero()) {
    const int degree = std::clamp(scene.settings.sh_degree, 0, kMaxShDegree);
    const int count = (degree + 1) * (degree + 1);
    ShBasis basis;
    std::array<Vec3, kShCoeffCount> basis_grad;
    sh_basis_with_gradient(s.view_dir, degree, &basis, &basis_grad);
    Vec3 d_dir = Vec3::Zero();
    for (int k = 0; k < count; ++k) {
      grad->sh(k) += basis[k] * d_raw;
      d_dir += basis_grad[k] * tri.sh[k].dot(d_raw);
    }
    if (degree > 0 && s.view_distance > 0.0) {
      const Vec3& d = s.view_dir;
      const Vec3 d_centroid = (d_dir - d * d.dot(d_dir)) / s.view_distance;
      for (int j = 0; j < 3; ++j) grad->vertex(j) += d_centroid / 3.0;
    }
  }
}

}  // namespace

bool TriangleGradient::is_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

void accumulate(GradientSet* dst, const GradientSet& src, double scale) {
  if (dst->size() != src.size()) {
    throw std::invalid_argument("gradient sets differ in size");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (int k = 0; k < kParamsPerTriangle; ++k) {
      (*dst)[i][k] += scale * src[i][k];
    }
  }
}

GradientSet render_backward(const PreparedScene& scene,
                            std::span<const Triangle3D> triangles,
                            const RenderOutput& forward,
                            const UpstreamGradients& upstream) {
  const CameraIntrinsics& intr = scene.camera.intrinsics;
  const RenderSettings& settings = scene.settings;
  if (triangles.size() != scene.triangle_count ||
      scene_fingerprint(triangles) != scene.fingerprint) {
    throw std::invalid_argument(
        "render_backward: triangles do not match the prepared scene");
  }
  if (upstream.d_image.size() != 3 * static_cast<std::size_t>(intr.num_pixels())) {
    throw std::invalid_argument("render_backward: d_image has the wrong size");
  }
  const bool has_weight = !upstream.d_weight.empty();
  const bool has_depth = !upstream.d_depth.empty();
  if (has_weight || has_depth) {
    const std::size_t items = forward.fragments.items.size();
    if (forward.fragments.empty() ||
        (has_weight && upstream.d_weight.size() != items) ||
        (has_depth && upstream.d_depth.size() != items)) {
      throw std::invalid_argument(
          "render_backward: fragment gradients do not match the forward pass");
    }
  }
  for (double v : upstream.d_image) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("render_backward: non-finite d_image");
    }
  }

  const TileGrid& grid = scene.tiles;
  const int num_tiles = grid.num_tiles();
  const std::size_t num_splats = scene.splats.size();
  const int threads = omp_get_max_threads();
  std::vector<std::vector<SplatAccum>> accum(threads);
  std::atomic<bool> mismatch{false};

#pragma omp parallel num_threads(threads)
  {
    const int tid = omp_get_thread_num();
    std::vector<SplatAccum>& acc = accum[tid];
    acc.assign(num_splats, SplatAccum{});
    std::vector<FragmentRecord> records;
    std::vector<std::uint32_t> row;
    // Static schedule keeps the float summation order fixed for a given
    // thread count.
#pragma omp for schedule(static, 1)
    for (int t = 0; t < num_tiles; ++t) {
      const auto list = grid.tile(t);
      const int x0 = (t % grid.tiles_x) * grid.tile_size;
      const int y0 = (t / grid.tiles_x) * grid.tile_size;
      const int x1 = std::min(x0 + grid.tile_size, intr.width);
      const int y1 = std::min(y0 + grid.tile_size, intr.height);
      for (int y = y0; y < y1; ++y) {
        filter_row(scene, list, y, &row);
        for (int x = x0; x < x1; ++x) {
          const int pixel = y * intr.width + x;
          const Vec2 p = pixel_center(x, y);
          const double* g_img = &upstream.d_image[3 * static_cast<std::size_t>(pixel)];
          const Vec3 g_color(g_img[0], g_img[1], g_img[2]);

          records.clear();
          double transmittance = 1.0;
          for (const std::uint32_t idx : row) {
            const Splat& s = scene.splats[idx];
            if (!s.bounds.contains(x, y)) continue;
            const WindowSample w = evaluate_window(s.proj, p, s.sigma, settings.mode);
            double alpha = s.opacity * w.value;
            if (alpha < settings.tau_cutoff) continue;
            const bool clamped = alpha > kAlphaMax;
            if (clamped) alpha = kAlphaMax;
            records.push_back({idx, w, alpha, transmittance, clamped});
            transmittance *= 1.0 - alpha;
            if (transmittance < kTransmittanceStop) break;
          }
          if (g_color.isZero() && !has_weight && !has_depth) continue;

          std::size_t frag_base = 0;
          if (has_weight || has_depth) {
            frag_base = forward.fragments.offsets[pixel];
            if (forward.fragments.offsets[pixel + 1] - frag_base != records.size()) {
              mismatch = true;
              continue;
            }
          }
          const Vec3 ray = pixel_ray(intr, p);

          double suffix = g_color.dot(settings.background) * transmittance;
          for (std::size_t i = records.size(); i-- > 0;) {
            const FragmentRecord& rec = records[i];
            const Splat& s = scene.splats[rec.splat];
            SplatAccum& a = acc[rec.splat];
            const double weight = rec.alpha * rec.transmittance;
            const double g_weight = has_weight ? upstream.d_weight[frag_base + i] : 0.0;
            const double e = g_color.dot(s.color) + g_weight;
            a.g_color += weight * g_color;
            const double g_alpha = rec.transmittance * e - suffix / (1.0 - rec.alpha);
            suffix += e * weight;

            if (has_depth) {
              const double g_z = upstream.d_depth[frag_base + i];
              const PlaneDepth pd = plane_depth(s, ray);
              if (g_z != 0.0 && !pd.clamped) {
                const Vec3& va = s.camera_vertices[0];
                const Vec3& vb = s.camera_vertices[1];
                const Vec3& vc = s.camera_vertices[2];
                const double scale = g_z / ray.dot(s.plane_normal);
                const double z = pd.depth;
                a.g_camera[0] += scale * (vb.cross(vc) - z * (vb - vc).cross(ray));
                a.g_camera[1] += scale * (vc.cross(va) - z * (vc - va).cross(ray));
                a.g_camera[2] += scale * (va.cross(vb) - z * (va - vb).cross(ray));
              }
            }

            if (rec.clamped || g_alpha == 0.0) continue;
            const double value = rec.window.value;
            a.g_opacity += g_alpha * value;
            const double g_value = g_alpha * s.opacity;
            double g_phi;
            if (settings.mode == WindowMode::kNormalized) {
              const double ratio = rec.window.phi / s.proj.phi_s;
              a.g_sigma += g_value * value * std::log(ratio);
              g_phi = g_value * s.sigma * value / rec.window.phi;
              a.g_phi_s -= g_value * s.sigma * value / s.proj.phi_s;
            } else {
              const double slope = value * (1.0 - value);
              a.g_sigma += g_value * slope * rec.window.phi / (s.sigma * s.sigma);
              g_phi = -g_value * slope / s.sigma;
            }
            a.edge_g[rec.window.edge] += g_phi;
            a.edge_gp[rec.window.edge] += g_phi * p;
          }
        }
      }
    }
  }
  if (mismatch) {
    throw std::invalid_argument(
        "render_backward: fragment lists differ from the forward pass");
  }

  std::vector<SplatAccum> total(num_splats);
  for (int t = 0; t < threads; ++t) {
    for (std::size_t i = 0; i < num_splats; ++i) total[i].add(accum[t][i]);
  }
  GradientSet grads(triangles.size());
  for (std::size_t i = 0; i < num_splats; ++i) {
    const Splat& s = scene.splats[i];
    const std::uint32_t tri = s.proj.source_index;
    splat_to_triangle(scene, triangles[tri], s, total[i], &grads[tri]);
  }
  return grads;
}

GradientSet render_backward(std::span<const Triangle3D> triangles,
                            const Camera& camera,
                            const RenderSettings& settings,
                            std::span<const double> d_image) {
  const PreparedScene scene = prepare_scene(triangles, camera, settings);
  const RenderOutput forward = render(scene);
  UpstreamGradients up;
  up.d_image.assign(d_image.begin(), d_image.end());
  return render_backward(scene, triangles, forward, up);
}

SceneFunctional weighted_image_functional(const Camera& camera,
                                          const RenderSettings& settings,
                                          std::vector<double> weights) {
  return [camera, settings, w = std::move(weights)](
             std::span<const Triangle3D> tris) {
    const RenderOutput out = render_reference(prepare_scene(tris, camera, settings));
    if (out.image.rgb.size() != w.size()) {
      throw std::invalid_argument("functional weights do not match image size");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * out.image.rgb[i];
    return sum;
  };
}

double finite_difference_step(double value) {
  return std::clamp(1e-5 * std::abs(value), 1e-5, 1e-3);
}

double finite_difference(const SceneFunctional& f,
                         std::vector<Triangle3D> triangles, int triangle,
                         int param, double h) {
  double& x = parameter(triangles.at(triangle), param);
  const double x0 = x;
  x = x0 + h;
  const double plus = f(triangles);
  x = x0 - h;
  const double minus = f(triangles);
  x = x0;
  return (plus - minus) / (2.0 * h);
}

}  // namespace trisplat
