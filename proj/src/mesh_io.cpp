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

#include "trisplat/mesh_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "trisplat/image_io.hpp"
#include "trisplat/sh.hpp"

namespace fs = std::filesystem;

namespace trisplat {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

struct PlyProperty {
  std::string name;
  std::string type;
  bool list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
  // Scalar properties, row-major; list properties are flattened.
  std::vector<double> values;
  std::vector<std::size_t> list_offsets{0};
  std::vector<std::int64_t> list_values;

  std::size_t scalars() const {
    std::size_t n = 0;
    for (const auto& p : props) n += !p.list;
    return n;
  }
  int column(const std::string& name) const {
    int c = 0;
    for (const auto& p : props) {
      if (p.list) continue;
      if (p.name == name) return c;
      ++c;
    }
    return -1;
  }
};

struct PlyData {
  std::vector<std::string> comments;
  std::vector<PlyElement> elements;

  const PlyElement* find(const std::string& name) const {
    for (const auto& e : elements)
      if (e.name == name) return &e;
    return nullptr;
  }
};

std::size_t type_size(const std::string& t) {
  static const std::map<std::string, std::size_t> sizes{
      {"char", 1},   {"uchar", 1},  {"int8", 1},    {"uint8", 1},   {"short", 2},
      {"ushort", 2}, {"int16", 2},  {"uint16", 2},  {"int", 4},     {"uint", 4},
      {"int32", 4},  {"uint32", 4}, {"float", 4},   {"float32", 4}, {"double", 8},
      {"float64", 8}};
  const auto it = sizes.find(t);
  if (it == sizes.end()) throw std::runtime_error("unsupported PLY type " + t);
  return it->second;
}

template <typename T>
double load_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double decode(const std::string& t, const char* p) {
  if (t == "char" || t == "int8") return load_as<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return load_as<std::uint8_t>(p);
  if (t == "short" || t == "int16") return load_as<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return load_as<std::uint16_t>(p);
  if (t == "int" || t == "int32") return load_as<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return load_as<std::uint32_t>(p);
  if (t == "float" || t == "float32") return load_as<float>(p);
  return load_as<double>(p);
}

PlyData read_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto fail = [&](const std::string& what) -> void {
    throw std::runtime_error(path.string() + ": " + what);
  };
  std::string line;
  std::getline(in, line);
  if (line != "ply") fail("not a PLY file");
  PlyData data;
  bool binary = false;
  for (;;) {
    if (!std::getline(in, line)) fail("truncated header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end_header") break;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        fail("unsupported PLY format " + fmt);
      }
    } else if (tag == "comment") {
      data.comments.push_back(line.size() > 8 ? line.substr(8) : "");
    } else if (tag == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      data.elements.push_back(e);
    } else if (tag == "property") {
      if (data.elements.empty()) fail("property before element");
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") {
        p.list = true;
        ls >> p.count_type >> p.type;
      }
      ls >> p.name;
      type_size(p.type);
      data.elements.back().props.push_back(p);
    }
  }
  for (PlyElement& e : data.elements) {
    e.values.reserve(e.count * e.scalars());
    for (std::size_t row = 0; row < e.count; ++row) {
      for (const PlyProperty& p : e.props) {
        if (binary) {
          char buf[8];
          if (p.list) {
            const std::size_t cs = type_size(p.count_type);
            if (!in.read(buf, static_cast<std::streamsize>(cs))) fail("truncated data");
            const auto n = static_cast<std::size_t>(decode(p.count_type, buf));
            const std::size_t vs = type_size(p.type);
            for (std::size_t k = 0; k < n; ++k) {
              if (!in.read(buf, static_cast<std::streamsize>(vs))) fail("truncated data");
              e.list_values.push_back(static_cast<std::int64_t>(decode(p.type, buf)));
            }
            e.list_offsets.push_back(e.list_values.size());
          } else {
            const std::size_t s = type_size(p.type);
            if (!in.read(buf, static_cast<std::streamsize>(s))) fail("truncated data");
            e.values.push_back(decode(p.type, buf));
          }
        } else {
          double v;
          if (p.list) {
            std::size_t n;
            if (!(in >> n)) fail("truncated data");
            for (std::size_t k = 0; k < n; ++k) {
              if (!(in >> v)) fail("truncated data");
              e.list_values.push_back(static_cast<std::int64_t>(v));
            }
            e.list_offsets.push_back(e.list_values.size());
          } else {
            if (!(in >> v)) fail("truncated data");
            e.values.push_back(v);
          }
        }
      }
    }
  }
  return data;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::ofstream open_binary(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::array<std::uint8_t, 3> face_color(const Triangle3D& t) {
  const Vec3 c = dc_color(t.sh);
  return {quantize_unit(c.x()), quantize_unit(c.y()), quantize_unit(c.z())};
}

void write_ply(std::span<const Triangle3D> tris, const fs::path& path) {
  std::ofstream out = open_binary(path);
  out << "ply\nformat binary_little_endian 1.0\ncomment trisplat triangle soup\n"
      << "element vertex " << 3 * tris.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << tris.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const Triangle3D& t : tris) {
    const auto rgb = face_color(t);
    for (const Vec3& v : t.vertices) {
      for (int c = 0; c < 3; ++c) put(out, static_cast<float>(v[c]));
      for (std::uint8_t b : rgb) put(out, b);
    }
  }
  for (std::size_t i = 0; i < tris.size(); ++i) {
    put<std::uint8_t>(out, 3);
    for (int j = 0; j < 3; ++j) put(out, static_cast<std::int32_t>(3 * i + j));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_obj(std::span<const Triangle3D> tris, const fs::path& path) {
  fs::path mtl = path;
  mtl.replace_extension(".mtl");
  std::map<std::array<std::uint8_t, 3>, int> materials;
  std::vector<int> face_material(tris.size());
  for (std::size_t i = 0; i < tris.size(); ++i) {
    const auto rgb = face_color(tris[i]);
    const auto [it, added] = materials.emplace(rgb, static_cast<int>(materials.size()));
    face_material[i] = it->second;
  }
  std::ofstream m(mtl);
  if (!m) throw std::runtime_error("cannot write " + mtl.string());
  std::vector<std::array<std::uint8_t, 3>> by_id(materials.size());
  for (const auto& [rgb, id] : materials) by_id[id] = rgb;
  for (std::size_t id = 0; id < by_id.size(); ++id) {
    m << "newmtl c" << id << "\nKd " << by_id[id][0] / 255.0 << ' ' << by_id[id][1] / 255.0
      << ' ' << by_id[id][2] / 255.0 << "\n";
  }

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(9) << "mtllib " << mtl.filename().string() << "\n";
  for (const Triangle3D& t : tris)
    for (const Vec3& v : t.vertices)
      out << "v " << static_cast<float>(v.x()) << ' ' << static_cast<float>(v.y()) << ' '
          << static_cast<float>(v.z()) << "\n";
  int current = -1;
  for (std::size_t i = 0; i < tris.size(); ++i) {
    if (face_material[i] != current) {
      current = face_material[i];
      out << "usemtl c" << current << "\n";
    }
    out << "f " << 3 * i + 1 << ' ' << 3 * i + 2 << ' ' << 3 * i + 3 << "\n";
  }
  if (!out || !m) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> model_columns() {
  std::vector<std::string> names;
  for (int j = 0; j < 3; ++j)
    for (const char* c : {"x", "y", "z"}) names.push_back(c + std::to_string(j));
  names.push_back("opacity");
  names.push_back("sigma");
  for (int k = 0; k < kShCoeffCount; ++k)
    for (const char* c : {"r", "g", "b"}) names.push_back("sh" + std::to_string(k) + "_" + c);
  return names;
}

}  // namespace

MeshFormat parse_mesh_format(const std::string& name) {
  if (name == "ply") return MeshFormat::kPly;
  if (name == "obj") return MeshFormat::kObj;
  throw std::invalid_argument("unknown mesh format " + name + " (expected ply or obj)");
}

void export_mesh(std::span<const Triangle3D> triangles, const fs::path& path,
                 MeshFormat format) {
  if (format == MeshFormat::kPly) {
    write_ply(triangles, path);
  } else {
    write_obj(triangles, path);
  }
}

ColoredSoup read_ply_soup(const fs::path& path) {
  const PlyData data = read_ply(path);
  const PlyElement* vert = data.find("vertex");
  const PlyElement* face = data.find("face");
  if (!vert || !face) throw std::runtime_error(path.string() + ": missing vertex or face element");
  const int cx = vert->column("x"), cy = vert->column("y"), cz = vert->column("z");
  const int cr = vert->column("red"), cg = vert->column("green"), cb = vert->column("blue");
  if (cx < 0 || cy < 0 || cz < 0) throw std::runtime_error(path.string() + ": missing x/y/z");
  const std::size_t stride = vert->scalars();
  auto at = [&](std::int64_t v, int col) { return vert->values[v * stride + col]; };
  ColoredSoup soup;
  for (std::size_t f = 0; f < face->count; ++f) {
    const std::size_t b = face->list_offsets[f], e = face->list_offsets[f + 1];
    if (e - b != 3) throw std::runtime_error(path.string() + ": non-triangular face");
    std::array<Vec3, 3> tri;
    for (int j = 0; j < 3; ++j) {
      const std::int64_t v = face->list_values[b + j];
      if (v < 0 || static_cast<std::size_t>(v) >= vert->count) {
        throw std::runtime_error(path.string() + ": vertex index out of range");
      }
      tri[j] = Vec3(at(v, cx), at(v, cy), at(v, cz));
    }
    soup.faces.push_back(tri);
    std::array<std::uint8_t, 3> rgb{128, 128, 128};
    if (cr >= 0 && cg >= 0 && cb >= 0) {
      const std::int64_t v = face->list_values[b];
      rgb = {static_cast<std::uint8_t>(at(v, cr)), static_cast<std::uint8_t>(at(v, cg)),
             static_cast<std::uint8_t>(at(v, cb))};
    }
    soup.colors.push_back(rgb);
  }
  return soup;
}

std::vector<Triangle3D> soup_to_triangles(const ColoredSoup& soup, double sigma) {
  std::vector<Triangle3D> out(soup.faces.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].vertices = soup.faces[i];
    out[i].opacity = 1.0;
    out[i].sigma = sigma;
    out[i].sh[0] = rgb_to_sh_dc(
        Vec3(soup.colors[i][0], soup.colors[i][1], soup.colors[i][2]) / 255.0);
  }
  return out;
}

void save_model(std::span<const Triangle3D> triangles, const ModelInfo& info,
                const fs::path& path) {
  std::ofstream out = open_binary(path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "comment trisplat model\n"
      << "comment window " << (info.mode == WindowMode::kSigmoid ? "sigmoid" : "normalized")
      << "\ncomment sh_degree " << info.sh_degree << "\ncomment solid " << (info.solid ? 1 : 0)
      << "\nelement triangle " << triangles.size() << "\n";
  for (const std::string& name : model_columns()) out << "property double " << name << "\n";
  out << "end_header\n";
  for (const Triangle3D& t : triangles)
    for (int k = 0; k < kParamsPerTriangle; ++k) put(out, parameter(t, k));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Triangle3D> load_model(const fs::path& path, ModelInfo* info) {
  const PlyData data = read_ply(path);
  const PlyElement* e = data.find("triangle");
  if (!e) throw std::runtime_error(path.string() + ": not a trisplat model");
  const std::vector<std::string> names = model_columns();
  std::vector<int> cols(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    cols[k] = e->column(names[k]);
    if (cols[k] < 0) throw std::runtime_error(path.string() + ": missing property " + names[k]);
  }
  const std::size_t stride = e->scalars();
  std::vector<Triangle3D> out(e->count);
  for (std::size_t i = 0; i < e->count; ++i)
    for (int k = 0; k < kParamsPerTriangle; ++k)
      parameter(out[i], k) = e->values[i * stride + cols[k]];
  if (info) {
    *info = ModelInfo{};
    for (const std::string& c : data.comments) {
      std::istringstream ls(c);
      std::string key, value;
      ls >> key >> value;
      if (key == "window") info->mode = value == "sigmoid" ? WindowMode::kSigmoid : WindowMode::kNormalized;
      if (key == "sh_degree") info->sh_degree = std::stoi(value);
      if (key == "solid") info->solid = value == "1";
    }
  }
  return out;
}

}  // namespace trisplat
