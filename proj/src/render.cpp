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

#include "trisplat/render.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

#include "trisplat/sh.hpp"

namespace trisplat {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void hash_bytes(std::uint64_t* h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    *h ^= bytes[i];
    *h *= kFnvPrime;
  }
}

template <typename T>
void hash_value(std::uint64_t* h, const T& v) {
  hash_bytes(h, &v, sizeof(T));
}

// Splats are large, so ordering works on (depth, index) keys.
struct SortKey {
  double depth;
  std::uint32_t slot;
  std::uint32_t source;
  bool operator<(const SortKey& o) const {
    return depth != o.depth ? depth < o.depth : source < o.source;
  }
};


// Front-to-back compositing of one pixel. Visits candidate splats in order;
// `use_bounds` enables the cheap rectangle rejection of the tiled path.
// on_fragment(splat_index, weight, clamped, sample) is called for every
// fragment that passes the alpha cutoff. Returns the final transmittance.
template <typename Candidates, typename OnFragment>
double composite_pixel(const PreparedScene& scene, int x, int y,
                       const Candidates& candidates, bool use_bounds,
                       Vec3* color, OnFragment&& on_fragment) {
  const RenderSettings& settings = scene.settings;
  const Vec2 p = pixel_center(x, y);
  double transmittance = 1.0;
  Vec3 c = Vec3::Zero();
  for (const std::uint32_t idx : candidates) {
    const Splat& s = scene.splats[idx];
    if (use_bounds && !s.bounds.contains(x, y)) continue;
    const WindowSample w = evaluate_window(s.proj, p, s.sigma, settings.mode);
    double alpha = s.opacity * w.value;
    if (alpha < settings.tau_cutoff) continue;
    const bool clamped = alpha > kAlphaMax;
    if (clamped) alpha = kAlphaMax;
    const double weight = alpha * transmittance;
    c += weight * s.color;
    on_fragment(idx, weight, clamped, w);
    transmittance *= 1.0 - alpha;
    if (transmittance < kTransmittanceStop) break;
  }
  *color = c + transmittance * settings.background;
  return transmittance;
}

struct IndexRange {
  std::uint32_t n;
  struct It {
    std::uint32_t i;
    std::uint32_t operator*() const { return i; }
    It& operator++() {
      ++i;
      return *this;
    }
    bool operator!=(const It& o) const { return i != o.i; }
  };
  It begin() const { return {0}; }
  It end() const { return {n}; }
};

}  // namespace

void filter_row(const PreparedScene& scene, std::span<const std::uint32_t> list,
                int y, std::vector<std::uint32_t>* row) {
  row->clear();
  for (const std::uint32_t idx : list) {
    const PixelRect& b = scene.splats[idx].bounds;
    if (y >= b.y0 && y < b.y1) row->push_back(idx);
  }
}

namespace {

RenderOutput make_output(const PreparedScene& scene) {
  const CameraIntrinsics& intr = scene.camera.intrinsics;
  RenderOutput out;
  out.image = ImageBuffer(intr.width, intr.height);
  out.alpha.assign(intr.num_pixels(), 0.0);
  if (scene.settings.collect_fragments) out.depth.assign(intr.num_pixels(), 0.0);
  out.max_weight.assign(scene.triangle_count, 0.0);
  out.pixel_count.assign(scene.triangle_count, 0);
  return out;
}

// Per-pixel scratch shared by both render routes.
struct PixelSink {
  const PreparedScene* scene;
  double* max_weight;
  std::uint32_t* pixel_count;
  std::vector<Fragment>* fragments;  // null unless collecting
  Vec3 ray;
  double weight_sum = 0.0;
  double depth_sum = 0.0;

  void operator()(std::uint32_t idx, double weight, bool /*clamped*/,
                  const WindowSample& /*w*/) {
    const Splat& s = scene->splats[idx];
    const std::uint32_t tri = s.proj.source_index;
    max_weight[tri] = std::max(max_weight[tri], weight);
    if (weight > kContributionWeight) ++pixel_count[tri];
    if (fragments) {
      const double z = plane_depth(s, ray).depth;
      fragments->push_back({tri, weight, z});
      weight_sum += weight;
      depth_sum += weight * z;
    }
  }
};

void finish_pixel(RenderOutput* out, int pixel, const Vec3& color,
                  double transmittance, const PixelSink& sink, bool collect) {
  double* rgb = &out->image.rgb[3 * static_cast<std::size_t>(pixel)];
  rgb[0] = color[0];
  rgb[1] = color[1];
  rgb[2] = color[2];
  out->alpha[pixel] = 1.0 - transmittance;
  if (collect && sink.weight_sum > 0.0) {
    out->depth[pixel] = sink.depth_sum / sink.weight_sum;
  }
}

}  // namespace

std::uint64_t scene_fingerprint(std::span<const Triangle3D> triangles) {
  static_assert(sizeof(Triangle3D) == kParamsPerTriangle * sizeof(double));
  // FNV-1a over 64-bit words; the struct is a packed run of doubles.
  std::uint64_t h = kFnvOffset ^ triangles.size();
  for (const Triangle3D& t : triangles) {
    std::uint64_t words[kParamsPerTriangle];
    std::memcpy(words, &t, sizeof(words));
    for (const std::uint64_t w : words) h = (h ^ w) * kFnvPrime;
  }
  return h;
}

std::vector<ProjectedTriangle> depth_sort(std::vector<ProjectedTriangle> projected) {
  std::sort(projected.begin(), projected.end(),
            [](const ProjectedTriangle& a, const ProjectedTriangle& b) {
              if (a.sort_depth != b.sort_depth) return a.sort_depth < b.sort_depth;
              return a.source_index < b.source_index;
            });
  return projected;
}

TileGrid assign_tiles(std::span<const PixelRect> bounds, int width, int height,
                      int tile_size) {
  if (tile_size < 1) throw std::invalid_argument("tile size must be positive");
  TileGrid grid;
  grid.tile_size = tile_size;
  grid.tiles_x = (width + tile_size - 1) / tile_size;
  grid.tiles_y = (height + tile_size - 1) / tile_size;
  const int num_tiles = grid.num_tiles();
  std::vector<std::uint32_t> counts(num_tiles + 1, 0);
  auto for_tiles = [&](const PixelRect& r, auto&& fn) {
    if (r.empty()) return;
    const int tx0 = r.x0 / tile_size, tx1 = (r.x1 - 1) / tile_size;
    const int ty0 = r.y0 / tile_size, ty1 = (r.y1 - 1) / tile_size;
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) fn(ty * grid.tiles_x + tx);
    }
  };
  for (const PixelRect& r : bounds) {
    for_tiles(r, [&](int t) { ++counts[t + 1]; });
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  grid.offsets = counts;
  grid.entries.resize(counts[num_tiles]);
  std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
  for (std::uint32_t i = 0; i < bounds.size(); ++i) {
    for_tiles(bounds[i], [&](int t) { grid.entries[cursor[t]++] = i; });
  }
  return grid;
}

PlaneDepth plane_depth(const Splat& splat, const Vec3& ray) {
  const double z = splat.plane_det / ray.dot(splat.plane_normal);
  if (!std::isfinite(z)) return {splat.proj.sort_depth, true};
  if (z < splat.min_depth) return {splat.min_depth, true};
  if (z > splat.max_depth) return {splat.max_depth, true};
  return {z, false};
}

PreparedScene prepare_scene(std::span<const Triangle3D> triangles,
                            const Camera& camera,
                            const RenderSettings& settings) {
  camera.intrinsics.validate();
  camera.pose.validate();
  if (!(settings.tau_cutoff > 0.0 && settings.tau_cutoff < 1.0)) {
    throw std::invalid_argument("tau_cutoff must lie in (0, 1)");
  }
  const CameraIntrinsics& intr = camera.intrinsics;

  PreparedScene scene;
  scene.camera = camera;
  scene.settings = settings;
  scene.triangle_count = triangles.size();
  scene.fingerprint = scene_fingerprint(triangles);
  const Vec3 eye = camera.pose.center();

  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const Triangle3D& tri = triangles[i];
    if (!tri.is_finite()) {
      throw std::invalid_argument("triangle " + std::to_string(i) +
                                  " has a non-finite parameter");
    }
    if (!(tri.opacity > 0.0) || !(tri.sigma > 0.0)) {
      throw std::invalid_argument("triangle " + std::to_string(i) +
                                  " needs positive opacity and sigma");
    }
  }

  // Project first, order the survivors, then fill splats in final position.
  const auto n = static_cast<std::int64_t>(triangles.size());
  std::vector<std::optional<ProjectedTriangle>> projected(triangles.size());
#pragma omp parallel for schedule(dynamic, 1024)
  for (std::int64_t i = 0; i < n; ++i) {
    projected[i] = project_triangle(triangles[i], intr, camera.pose,
                                    static_cast<std::uint32_t>(i));
  }
  std::vector<SortKey> keys;
  keys.reserve(triangles.size());
  for (std::int64_t i = 0; i < n; ++i) {
    if (projected[i]) {
      keys.push_back({projected[i]->sort_depth, static_cast<std::uint32_t>(i),
                      projected[i]->source_index});
    }
  }
  std::sort(keys.begin(), keys.end());

  scene.splats.resize(keys.size());
  const auto m = static_cast<std::int64_t>(keys.size());
#pragma omp parallel for schedule(dynamic, 1024)
  for (std::int64_t k = 0; k < m; ++k) {
    const Triangle3D& tri = triangles[keys[k].slot];
    Splat& s = scene.splats[k];
    s.proj = *projected[keys[k].slot];
    s.opacity = tri.opacity;
    s.sigma = tri.sigma;
    s.bounds = tight_bbox(s.proj, s.opacity, s.sigma, settings.tau_cutoff,
                          intr.width, intr.height, settings.mode);
    const Vec3 to_tri = tri.centroid() - eye;
    s.view_distance = to_tri.norm();
    s.view_dir = s.view_distance > 0.0 ? Vec3(to_tri / s.view_distance)
                                       : Vec3(Vec3::UnitZ());
    const ShColor color = eval_sh_color(tri.sh, s.view_dir, settings.sh_degree);
    s.color = color.rgb;
    s.color_live = color.live;
    for (int j = 0; j < 3; ++j) {
      s.camera_vertices[j] = camera.pose.to_camera(tri.vertices[j]);
    }
    const Vec3& a = s.camera_vertices[0];
    const Vec3& b = s.camera_vertices[1];
    const Vec3& c = s.camera_vertices[2];
    s.plane_normal = a.cross(b) + b.cross(c) + c.cross(a);
    s.plane_det = a.dot(b.cross(c));
    s.min_depth = std::min({a.z(), b.z(), c.z()});
    s.max_depth = std::max({a.z(), b.z(), c.z()});
  }

  std::vector<PixelRect> bounds(scene.splats.size());
  for (std::size_t i = 0; i < bounds.size(); ++i) bounds[i] = scene.splats[i].bounds;
  scene.tiles = assign_tiles(bounds, intr.width, intr.height, settings.tile_size);
  return scene;
}

RenderOutput render(const PreparedScene& scene) {
  const CameraIntrinsics& intr = scene.camera.intrinsics;
  const bool collect = scene.settings.collect_fragments;
  const TileGrid& grid = scene.tiles;
  const int num_tiles = grid.num_tiles();
  const std::size_t n = scene.triangle_count;
  RenderOutput out = make_output(scene);

  const int threads = omp_get_max_threads();
  std::vector<std::vector<double>> max_weight(threads);
  std::vector<std::vector<std::uint32_t>> pixel_count(threads);
  // Fragments of each tile in pixel-major order plus per-pixel counts.
  std::vector<std::vector<Fragment>> tile_fragments(collect ? num_tiles : 0);
  std::vector<std::uint32_t> frag_count(collect ? intr.num_pixels() : 0, 0);

#pragma omp parallel num_threads(threads)
  {
    const int tid = omp_get_thread_num();
    max_weight[tid].assign(n, 0.0);
    pixel_count[tid].assign(n, 0);
    std::vector<std::uint32_t> row;
#pragma omp for schedule(dynamic, 1)
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
          PixelSink sink{&scene, max_weight[tid].data(),
                         pixel_count[tid].data(),
                         collect ? &tile_fragments[t] : nullptr,
                         pixel_ray(intr, pixel_center(x, y))};
          const std::size_t before = collect ? tile_fragments[t].size() : 0;
          Vec3 color;
          const double transmittance =
              composite_pixel(scene, x, y, row, true, &color, sink);
          finish_pixel(&out, pixel, color, transmittance, sink, collect);
          if (collect) {
            frag_count[pixel] =
                static_cast<std::uint32_t>(tile_fragments[t].size() - before);
          }
        }
      }
    }
  }

  for (int t = 0; t < threads; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      out.max_weight[i] = std::max(out.max_weight[i], max_weight[t][i]);
      out.pixel_count[i] += pixel_count[t][i];
    }
  }

  if (collect) {
    FragmentBuffer& fb = out.fragments;
    fb.offsets.assign(intr.num_pixels() + 1, 0);
    for (int i = 0; i < intr.num_pixels(); ++i) {
      fb.offsets[i + 1] = fb.offsets[i] + frag_count[i];
    }
    fb.items.resize(fb.offsets.back());
    for (int t = 0; t < num_tiles; ++t) {
      const int x0 = (t % grid.tiles_x) * grid.tile_size;
      const int y0 = (t / grid.tiles_x) * grid.tile_size;
      const int x1 = std::min(x0 + grid.tile_size, intr.width);
      const int y1 = std::min(y0 + grid.tile_size, intr.height);
      std::size_t cursor = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const int pixel = y * intr.width + x;
          std::copy_n(tile_fragments[t].begin() + cursor, frag_count[pixel],
                      fb.items.begin() + fb.offsets[pixel]);
          cursor += frag_count[pixel];
        }
      }
    }
  }
  return out;
}

RenderOutput render_reference(const PreparedScene& scene) {
  const CameraIntrinsics& intr = scene.camera.intrinsics;
  const bool collect = scene.settings.collect_fragments;
  RenderOutput out = make_output(scene);
  const IndexRange all{static_cast<std::uint32_t>(scene.splats.size())};
  if (collect) out.fragments.offsets.assign(intr.num_pixels() + 1, 0);

  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const int pixel = y * intr.width + x;
      PixelSink sink{&scene, out.max_weight.data(), out.pixel_count.data(),
                     collect ? &out.fragments.items : nullptr,
                     pixel_ray(intr, pixel_center(x, y))};
      Vec3 color;
      const double transmittance =
          composite_pixel(scene, x, y, all, false, &color, sink);
      finish_pixel(&out, pixel, color, transmittance, sink, collect);
      if (collect) out.fragments.offsets[pixel + 1] = out.fragments.items.size();
    }
  }
  return out;
}

std::uint64_t raster_state_signature(const PreparedScene& scene) {
  const CameraIntrinsics& intr = scene.camera.intrinsics;
  std::uint64_t h = kFnvOffset;
  for (const Splat& s : scene.splats) {
    hash_value(&h, s.proj.source_index);
    for (bool live : s.color_live) hash_value(&h, live);
  }
  const IndexRange all{static_cast<std::uint32_t>(scene.splats.size())};
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Vec3 ray = pixel_ray(intr, pixel_center(x, y));
      std::uint32_t count = 0;
      Vec3 color;
      const double transmittance = composite_pixel(
          scene, x, y, all, false, &color,
          [&](std::uint32_t idx, double, bool clamped, const WindowSample& w) {
            ++count;
            hash_value(&h, idx);
            hash_value(&h, clamped);
            hash_value(&h, w.edge);
            if (scene.settings.collect_fragments) {
              hash_value(&h, plane_depth(scene.splats[idx], ray).clamped);
            }
          });
      hash_value(&h, count);
      hash_value(&h, transmittance < kTransmittanceStop);
    }
  }
  return h;
}

}  // namespace trisplat
