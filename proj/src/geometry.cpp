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

#include "trisplat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace trisplat {
namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

double ProjectedTriangle::area() const {
  return 0.5 * std::abs(cross2(q[1] - q[0], q[2] - q[0]));
}

Incenter incenter(const Vec2& q0, const Vec2& q1, const Vec2& q2) {
  const double a = (q1 - q2).norm();
  const double b = (q2 - q0).norm();
  const double c = (q0 - q1).norm();
  const double perimeter = a + b + c;
  const double twice_area = std::abs(cross2(q1 - q0, q2 - q0));
  if (!(perimeter > 0.0) || 0.5 * twice_area < kMinScreenArea ||
      twice_area / perimeter < kMinInradius) {
    throw std::invalid_argument("incenter of a degenerate triangle");
  }
  const Vec2 s = (a * q0 + b * q1 + c * q2) / perimeter;
  return {s, -twice_area / perimeter};
}

std::optional<ProjectedTriangle> make_projected(const Vec2& q0, const Vec2& q1,
                                                const Vec2& q2,
                                                double sort_depth,
                                                std::uint32_t source_index) {
  const double twice_area = std::abs(cross2(q1 - q0, q2 - q0));
  const double perimeter = (q1 - q0).norm() + (q2 - q1).norm() + (q0 - q2).norm();
  if (!std::isfinite(twice_area) || 0.5 * twice_area < kMinScreenArea ||
      twice_area < kMinInradius * perimeter) {
    return std::nullopt;
  }

  ProjectedTriangle proj;
  proj.q = {q0, q1, q2};
  proj.sort_depth = sort_depth;
  proj.source_index = source_index;
  const Vec2 centroid = (q0 + q1 + q2) / 3.0;
  for (int i = 0; i < 3; ++i) {
    const Vec2& a = proj.q[i];
    const Vec2 e = proj.q[(i + 1) % 3] - a;
    Vec2 n(e.y(), -e.x());
    n /= e.norm();
    if (n.dot(centroid - a) > 0.0) n = -n;
    proj.normals[i] = n;
    proj.offsets[i] = -n.dot(a);
  }
  proj.incenter = incenter(q0, q1, q2).point;
  proj.phi_s = signed_distance(proj, proj.incenter);
  if (!(proj.phi_s < -kMinInradius * 0.5)) return std::nullopt;
  return proj;
}

Vec2 project_point(const Vec3& p, const CameraIntrinsics& intr) {
  return Vec2(intr.fx * p.x() / p.z() + intr.cx,
              intr.fy * p.y() / p.z() + intr.cy);
}

std::optional<ProjectedTriangle> project_triangle(const Triangle3D& tri,
                                                  const CameraIntrinsics& intr,
                                                  const CameraPose& pose,
                                                  std::uint32_t index) {
  for (const Vec3& v : tri.vertices) {
    if (!v.allFinite()) {
      throw std::invalid_argument("triangle " + std::to_string(index) +
                                  " has a non-finite vertex");
    }
  }
  std::array<Vec3, 3> cam;
  for (int i = 0; i < 3; ++i) cam[i] = pose.to_camera(tri.vertices[i]);
  const double depth = (cam[0].z() + cam[1].z() + cam[2].z()) / 3.0;
  if (depth < intr.z_near) return std::nullopt;
  // No near-plane clipping: a vertex behind the plane would project through
  // the camera center and flip the triangle.
  for (const Vec3& c : cam) {
    if (c.z() < intr.z_near) return std::nullopt;
  }
  return make_projected(project_point(cam[0], intr), project_point(cam[1], intr),
                        project_point(cam[2], intr), depth, index);
}

double signed_distance(const ProjectedTriangle& proj, const Vec2& p) {
  return std::max({proj.edge_value(0, p), proj.edge_value(1, p),
                   proj.edge_value(2, p)});
}

WindowSample evaluate_window(const ProjectedTriangle& proj, const Vec2& p,
                             double sigma, WindowMode mode) {
  WindowSample out;
  out.phi = proj.edge_value(0, p);
  for (int i = 1; i < 3; ++i) {
    const double l = proj.edge_value(i, p);
    if (l > out.phi) {
      out.phi = l;
      out.edge = i;
    }
  }
  if (mode == WindowMode::kNormalized) {
    if (out.phi >= 0.0) return out;
    out.value = std::pow(out.phi / proj.phi_s, sigma);
  } else {
    out.value = 1.0 / (1.0 + std::exp(out.phi / sigma));
  }
  return out;
}

namespace {

// Pixel index range whose centers lie in [lo, hi].
void center_range(double lo, double hi, int limit, int* first, int* last) {
  constexpr double kEps = 1e-6;
  const double a = std::ceil(lo - 0.5 - kEps);
  const double b = std::floor(hi - 0.5 + kEps) + 1.0;
  *first = static_cast<int>(std::clamp(a, 0.0, static_cast<double>(limit)));
  *last = static_cast<int>(std::clamp(b, 0.0, static_cast<double>(limit)));
}

PixelRect bbox_of(const std::array<Vec2, 3>& pts, int width, int height) {
  double min_x = pts[0].x(), max_x = pts[0].x();
  double min_y = pts[0].y(), max_y = pts[0].y();
  for (int i = 1; i < 3; ++i) {
    min_x = std::min(min_x, pts[i].x());
    max_x = std::max(max_x, pts[i].x());
    min_y = std::min(min_y, pts[i].y());
    max_y = std::max(max_y, pts[i].y());
  }
  PixelRect r;
  center_range(min_x, max_x, width, &r.x0, &r.x1);
  center_range(min_y, max_y, height, &r.y0, &r.y1);
  return r;
}

PixelRect intersect(const PixelRect& a, const PixelRect& b) {
  PixelRect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
              std::min(a.y1, b.y1)};
  if (r.empty()) return PixelRect{};
  return r;
}

// Triangle whose edges are all offset by `delta` (positive moves outward).
// Offsetting every edge equally is a homothety about the incenter.
std::array<Vec2, 3> offset_triangle(const ProjectedTriangle& proj,
                                    double delta) {
  const double scale = 1.0 + delta / (-proj.phi_s);
  std::array<Vec2, 3> out;
  for (int i = 0; i < 3; ++i) {
    out[i] = proj.incenter + scale * (proj.q[i] - proj.incenter);
  }
  return out;
}

}  // namespace

PixelRect vertex_bbox(const ProjectedTriangle& proj, int width, int height) {
  return bbox_of(proj.q, width, height);
}

double cutoff_shrink_distance(const ProjectedTriangle& proj, double opacity,
                              double sigma, double tau_cutoff) {
  const double r = -proj.phi_s;
  if (opacity <= tau_cutoff) return r;
  return r * std::pow(tau_cutoff / opacity, 1.0 / sigma);
}

PixelRect tight_bbox(const ProjectedTriangle& proj, double opacity,
                     double sigma, double tau_cutoff, int width, int height,
                     WindowMode mode) {
  if (opacity <= tau_cutoff) return PixelRect{};
  const double r = -proj.phi_s;
  if (mode == WindowMode::kNormalized) {
    const double d = cutoff_shrink_distance(proj, opacity, sigma, tau_cutoff);
    if (d >= r) return PixelRect{};
    return intersect(bbox_of(offset_triangle(proj, -d), width, height),
                     vertex_bbox(proj, width, height));
  }
  // sigmoid(-phi / sigma) >= a  <=>  phi <= sigma * log((1 - a) / a).
  const double a = tau_cutoff / opacity;
  const double delta = sigma * std::log((1.0 - a) / a);
  if (!std::isfinite(delta)) {
    return PixelRect{0, 0, width, height};
  }
  if (delta <= -r) return PixelRect{};
  return bbox_of(offset_triangle(proj, delta), width, height);
}

}  // namespace trisplat
