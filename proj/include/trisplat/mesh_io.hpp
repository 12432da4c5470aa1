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

#ifndef TRISPLAT_MESH_IO_HPP_
#define TRISPLAT_MESH_IO_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trisplat/geometry.hpp"
#include "trisplat/triangle.hpp"

namespace trisplat {

enum class MeshFormat { kPly, kObj };

MeshFormat parse_mesh_format(const std::string& name);

// Triangle soup with degree-0 colors; no vertex sharing. OBJ writes a
// sibling .mtl file holding one material per distinct color.
void export_mesh(std::span<const Triangle3D> triangles, const std::filesystem::path& path,
                 MeshFormat format);

struct ColoredSoup {
  std::vector<std::array<Vec3, 3>> faces;
  std::vector<std::array<std::uint8_t, 3>> colors;  // per face (first vertex)
};

// Reads binary little-endian or ASCII PLY with float/double positions,
// uchar colors and list-encoded faces.
ColoredSoup read_ply_soup(const std::filesystem::path& path);

// Solid triangles (o = 1) rebuilt from an exported soup.
std::vector<Triangle3D> soup_to_triangles(const ColoredSoup& soup, double sigma);

struct ModelInfo {
  WindowMode mode = WindowMode::kNormalized;
  int sh_degree = kMaxShDegree;
  bool solid = false;
};

// Full-precision model: every parameter of every triangle as float64.
void save_model(std::span<const Triangle3D> triangles, const ModelInfo& info,
                const std::filesystem::path& path);
std::vector<Triangle3D> load_model(const std::filesystem::path& path, ModelInfo* info = nullptr);

}  // namespace trisplat

#endif  // TRISPLAT_MESH_IO_HPP_
