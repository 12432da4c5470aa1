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

#ifndef TRISPLAT_GEOMETRY_HPP_
#define TRISPLAT_GEOMETRY_HPP_

#include <array>
#include <cstdint>
#include <optional>

#include "trisplat/camera.hpp"
#include "trisplat/triangle.hpp"

namespace trisplat {

// Normalized: ReLU(phi(p) / phi(s))^sigma, compactly supported on the
// triangle. Sigmoid: sigmoid(-phi(p) / sigma), the soft-rasterizer baseline
// whose support is unbounded.
enum class WindowMode { kNormalized, kSigmoid };

// Projected triangles thinner than these are culled.
inline constexpr double kMinScreenArea = 1e-8;
inline constexpr double kMinInradius = 1e-6;

// Screen-space triangle with oriented edge lines L_i(p) = n_i . p + d_i,
// negative inside. Edge i runs from q[i] to q[(i + 1) % 3].
struct ProjectedTriangle {
  std::array<Vec2, 3> q;
  std::array<Vec2, 3> normals;
  std::array<double, 3> offsets{};
  Vec2 incenter = Vec2::Zero();
  double phi_s = 0.0;  // signed distance at the incenter, equals -inradius
  double sort_depth = 0.0;
  std::uint32_t source_index = 0;

  double edge_value(int i, const Vec2& p) const {
    return normals[i].dot(p) + offsets[i];
  }
  double area() const;
};

// Builds edge lines and incenter from screen-space vertices. Returns nullopt
// for degenerate triangles (area < kMinScreenArea or inradius < kMinInradius).
std::optional<ProjectedTriangle> make_projected(const Vec2& q0, const Vec2& q1,
                                                const Vec2& q2,
                                                double sort_depth = 1.0,
                                                std::uint32_t source_index = 0);

// Perspective projection of a world point, no validity checks.
Vec2 project_point(const Vec3& camera_point, const CameraIntrinsics& intr);

// Projects a 3D triangle. nullopt means culled: behind z_near or degenerate
// on screen. Throws std::invalid_argument for non-finite vertices.
std::optional<ProjectedTriangle> project_triangle(const Triangle3D& tri,
                                                  const CameraIntrinsics& intr,
                                                  const CameraPose& pose,
                                                  std::uint32_t index = 0);

// phi(p) = max_i L_i(p).
double signed_distance(const ProjectedTriangle& proj, const Vec2& p);

struct Incenter {
  Vec2 point;
  double phi;
};

// Side-length weighted incenter. Throws std::invalid_argument if degenerate.
Incenter incenter(const Vec2& q0, const Vec2& q1, const Vec2& q2);

// Window value plus the pieces the backward pass needs.
struct WindowSample {
  double value = 0.0;
  double phi = 0.0;  // signed distance at the pixel
  int edge = 0;      // index of the edge attaining the max
};

WindowSample evaluate_window(const ProjectedTriangle& proj, const Vec2& p,
                             double sigma, WindowMode mode);

inline double window_value(const ProjectedTriangle& proj, const Vec2& p,
                           double sigma,
                           WindowMode mode = WindowMode::kNormalized) {
  return evaluate_window(proj, p, sigma, mode).value;
}

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool empty() const { return x0 >= x1 || y0 >= y1; }
  bool contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  long long area() const {
    return empty() ? 0 : static_cast<long long>(x1 - x0) * (y1 - y0);
  }
};

// Pixels whose centers fall inside the vertex bounding box.
PixelRect vertex_bbox(const ProjectedTriangle& proj, int width, int height);

// Bounding box of the pixels where opacity * window can reach tau_cutoff.
// In normalized mode each edge moves inward by |phi_s| (tau/o)^(1/sigma); in
// sigmoid mode the edges move by the (signed) distance at which the sigmoid
// crosses tau/o. Normalized-mode results are a subset of vertex_bbox.
PixelRect tight_bbox(const ProjectedTriangle& proj, double opacity,
                     double sigma, double tau_cutoff, int width, int height,
                     WindowMode mode = WindowMode::kNormalized);

// Edge shrink distance used by tight_bbox in normalized mode. Returns a value
// >= |phi_s| (whole triangle excluded) when opacity <= tau_cutoff.
double cutoff_shrink_distance(const ProjectedTriangle& proj, double opacity,
                              double sigma, double tau_cutoff);

}  // namespace trisplat

#endif  // TRISPLAT_GEOMETRY_HPP_
