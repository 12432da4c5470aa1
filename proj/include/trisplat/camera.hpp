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

#ifndef TRISPLAT_CAMERA_HPP_
#define TRISPLAT_CAMERA_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace trisplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole intrinsics. Pixel (x, y) covers [x, x+1) x [y, y+1); its center is
// at (x + 0.5, y + 0.5), matching the COLMAP convention.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  double z_near = 0.01;

  // Throws std::invalid_argument if any invariant is violated.
  void validate() const;
  int num_pixels() const { return width * height; }
};

// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const;
  Vec3 center() const { return -rotation.transpose() * translation; }
  Vec3 to_camera(const Vec3& world) const {
    return rotation * world + translation;
  }

  // Camera at `eye` looking at `target`. Image y axis points along -up.
  static CameraPose look_at(const Vec3& eye, const Vec3& target,
                            const Vec3& up);
  // Unit quaternion (w, x, y, z) to pose, COLMAP order.
  static CameraPose from_quaternion(double qw, double qx, double qy, double qz,
                                    const Vec3& translation);
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

// Center of pixel (x, y) in continuous image coordinates.
inline Vec2 pixel_center(int x, int y) { return Vec2(x + 0.5, y + 0.5); }

}  // namespace trisplat

#endif  // TRISPLAT_CAMERA_HPP_
