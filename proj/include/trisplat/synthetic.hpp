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

#ifndef TRISPLAT_SYNTHETIC_HPP_
#define TRISPLAT_SYNTHETIC_HPP_

#include <filesystem>

#include "trisplat/scene.hpp"

namespace trisplat {

struct CubeSceneOptions {
  int width = 128;
  int height = 128;
  int train_views = 24;
  int test_views = 4;
  int supersample = 4;  // samples per pixel along each axis
};

// Ray-traced textured cube on a square ground plane over a black background.
// Writes images/ and scene.txt into `dir`. The scene has no points and
// carries its bounding box for random initialization.
SfmScene write_cube_scene(const std::filesystem::path& dir, const CubeSceneOptions& opt = {});

// Radiance along a world-space ray; black when nothing is hit.
Vec3 trace_cube_scene(const Vec3& origin, const Vec3& dir);

// Three solid triangles rendered from six 32x32 views, with one SfM point per
// triangle. Small enough for smoke tests.
SfmScene write_tri3_scene(const std::filesystem::path& dir);

}  // namespace trisplat

#endif  // TRISPLAT_SYNTHETIC_HPP_
