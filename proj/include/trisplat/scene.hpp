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

#ifndef TRISPLAT_SCENE_HPP_
#define TRISPLAT_SCENE_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trisplat/camera.hpp"
#include "trisplat/image.hpp"

namespace trisplat {

struct SfmPoint {
  Vec3 position = Vec3::Zero();
  Vec3 rgb = Vec3::Constant(0.5);  // [0, 1]
};

struct SfmView {
  CameraPose pose;
  int camera_id = 0;
  std::filesystem::path image;  // absolute, or relative to the scene root
  std::string name;
  bool holdout = false;
};

struct Bounds {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

struct SfmScene {
  std::filesystem::path root;
  std::map<int, CameraIntrinsics> cameras;
  std::vector<SfmView> views;
  std::vector<SfmPoint> points;
  std::optional<Bounds> bounds;  // fallback-init box, if the scene defines one

  void validate() const;
  Camera camera(std::size_t view) const;
  std::filesystem::path image_path(std::size_t view) const;
  std::vector<std::size_t> train_views() const;
  std::vector<std::size_t> test_views() const;
};

// Every n-th view (by name order) is held out in COLMAP scenes.
inline constexpr int kHoldoutEvery = 8;

// COLMAP text model: cameras.txt, images.txt, points3D.txt in `dir`, or in
// dir/sparse/0. Images are looked up in dir/images.
SfmScene load_colmap(const std::filesystem::path& dir);

// Native plain-text scene (see README).
SfmScene load_native(const std::filesystem::path& file);
void save_native(const SfmScene& scene, const std::filesystem::path& file);

// Writes the three COLMAP text files into `dir`.
void save_colmap(const SfmScene& scene, const std::filesystem::path& dir);

// dir/scene.txt if present, COLMAP text otherwise.
SfmScene load_scene(const std::filesystem::path& dir);

ImageBuffer load_view_image(const SfmScene& scene, std::size_t view);

}  // namespace trisplat

#endif  // TRISPLAT_SCENE_HPP_
