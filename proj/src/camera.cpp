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

#include "trisplat/camera.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

namespace trisplat {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  if (width < 1 || height < 1) {
    throw std::invalid_argument("camera image size must be at least 1x1");
  }
  if (!(z_near > 0.0)) {
    throw std::invalid_argument("camera z_near must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("camera principal point must be finite");
  }
}

void CameraPose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw std::invalid_argument("camera pose must be finite");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  if (ortho > 1e-9) {
    throw std::invalid_argument("camera rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("camera rotation must have determinant +1");
  }
}

CameraPose CameraPose::look_at(const Vec3& eye, const Vec3& target,
                               const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) {
    // Looking along `up`; pick any perpendicular.
    right = forward.unitOrthogonal();
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  CameraPose pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * eye;
  return pose;
}

CameraPose CameraPose::from_quaternion(double qw, double qx, double qy,
                                       double qz, const Vec3& translation) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  if (!(q.norm() > 0.0)) {
    throw std::invalid_argument("zero quaternion");
  }
  q.normalize();
  CameraPose pose;
  pose.rotation = q.toRotationMatrix();
  pose.translation = translation;
  return pose;
}

}  // namespace trisplat
