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

#ifndef TRISPLAT_RENDER_HPP_
#define TRISPLAT_RENDER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trisplat/camera.hpp"
#include "trisplat/geometry.hpp"
#include "trisplat/image.hpp"
#include "trisplat/triangle.hpp"

namespace trisplat {

// Compositing constants.
inline constexpr double kAlphaMax = 0.99;
inline constexpr double kTransmittanceStop = 1e-4;
inline constexpr double kDefaultCutoff = 1.0 / 255.0;
// A pixel counts toward a triangle's coverage when its blend weight exceeds
// this.
inline constexpr double kContributionWeight = 1.0 / 255.0;

struct RenderSettings {
  WindowMode mode = WindowMode::kNormalized;
  Vec3 background = Vec3::Zero();
  bool collect_fragments = false;
  int sh_degree = kMaxShDegree;
  // Fragments with alpha below this are skipped; the same value drives the
  // tight tile bounds, so tiling never drops a contributing fragment.
  double tau_cutoff = kDefaultCutoff;
  int tile_size = 16;
};

// Everything the rasterizer needs about one visible triangle, stored in
// front-to-back order.
struct Splat {
  ProjectedTriangle proj;
  PixelRect bounds;
  double opacity = 0.0;
  double sigma = 1.0;
  Vec3 color = Vec3::Zero();
  std::array<bool, 3> color_live{true, true, true};
  Vec3 view_dir = Vec3::UnitZ();
  double view_distance = 1.0;
  // Camera-space vertices and the plane terms used for per-pixel depth:
  // depth(ray) = plane_det / ray.dot(plane_normal).
  std::array<Vec3, 3> camera_vertices;
  Vec3 plane_normal = Vec3::Zero();
  double plane_det = 0.0;
  double min_depth = 0.0;
  double max_depth = 0.0;
};

// Per-tile lists of splat indices (into PreparedScene::splats), each list in
// global depth order. Stored as offsets into one flat array.
struct TileGrid {
  int tile_size = 16;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> entries;

  int num_tiles() const { return tiles_x * tiles_y; }
  std::span<const std::uint32_t> tile(int t) const {
    return {entries.data() + offsets[t], entries.data() + offsets[t + 1]};
  }
};

// Projection, colors, depth order and tile lists for one camera. A render
// and its backward pass share this.
struct PreparedScene {
  Camera camera;
  RenderSettings settings;
  std::size_t triangle_count = 0;
  std::uint64_t fingerprint = 0;
  std::vector<Splat> splats;
  TileGrid tiles;
};

struct Fragment {
  std::uint32_t triangle = 0;  // index into the input triangle list
  double weight = 0.0;         // T * alpha
  double depth = 0.0;          // camera depth of the triangle plane
};

// Per-pixel fragment lists in compositing order.
struct FragmentBuffer {
  std::vector<std::size_t> offsets;  // num_pixels + 1 entries
  std::vector<Fragment> items;

  bool empty() const { return offsets.empty(); }
  std::span<const Fragment> pixel(int i) const {
    return {items.data() + offsets[i], items.data() + offsets[i + 1]};
  }
};

struct RenderOutput {
  ImageBuffer image;
  std::vector<double> alpha;  // accumulated opacity per pixel
  // Weight-normalized plane depth per pixel; 0 where nothing was drawn.
  // Filled only when fragments are collected.
  std::vector<double> depth;
  std::vector<double> max_weight;          // per input triangle
  std::vector<std::uint32_t> pixel_count;  // per input triangle
  FragmentBuffer fragments;
};

// Order-sensitive hash of every parameter, used to pair a backward pass with
// its forward pass.
std::uint64_t scene_fingerprint(std::span<const Triangle3D> triangles);

// Ascending sort_depth, ties broken by source_index.
std::vector<ProjectedTriangle> depth_sort(std::vector<ProjectedTriangle> projected);

// bounds[i] is the tight bbox of the i-th splat in depth order.
TileGrid assign_tiles(std::span<const PixelRect> bounds, int width, int height,
                      int tile_size);

// Projects, culls, shades and bins the triangles. Throws
// std::invalid_argument naming the first triangle with a non-finite
// parameter.
PreparedScene prepare_scene(std::span<const Triangle3D> triangles,
                            const Camera& camera,
                            const RenderSettings& settings);

// Tiled renderer, parallel over tiles.
RenderOutput render(const PreparedScene& scene);

// Members of a tile list whose bounds cover pixel row y, in list order.
void filter_row(const PreparedScene& scene, std::span<const std::uint32_t> list,
                int y, std::vector<std::uint32_t>* row);

// Serial renderer that visits every splat at every pixel, ignoring tiles and
// bounds. Same arithmetic as render(), kept as the reference.
RenderOutput render_reference(const PreparedScene& scene);

inline RenderOutput render(std::span<const Triangle3D> triangles,
                           const Camera& camera,
                           const RenderSettings& settings = {}) {
  return render(prepare_scene(triangles, camera, settings));
}

// Hash of every discrete decision the renderer makes (culling, skipped and
// clamped fragments, active edges, color clamps, early termination).
// Parameter perturbations that keep this hash fixed stay on one smooth piece
// of the image function.
std::uint64_t raster_state_signature(const PreparedScene& scene);

// Per-pixel ray direction in camera space with unit z.
inline Vec3 pixel_ray(const CameraIntrinsics& intr, const Vec2& p) {
  return Vec3((p.x() - intr.cx) / intr.fx, (p.y() - intr.cy) / intr.fy, 1.0);
}

struct PlaneDepth {
  double depth;
  bool clamped;
};

// Depth of the splat's plane along the pixel ray, clamped to the vertex depth
// range.
PlaneDepth plane_depth(const Splat& splat, const Vec3& ray);

}  // namespace trisplat

#endif  // TRISPLAT_RENDER_HPP_
