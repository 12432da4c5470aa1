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

#include "trisplat/scene.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "trisplat/image_io.hpp"

namespace fs = std::filesystem;

namespace trisplat {
namespace {

class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw std::runtime_error("cannot open " + path.string());
  }

  bool next(std::string* line) {
    if (!std::getline(in_, *line)) return false;
    ++number_;
    if (!line->empty() && line->back() == '\r') line->pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(path_.string() + ":" + std::to_string(number_) + ": " + what);
  }

 private:
  fs::path path_;
  std::ifstream in_;
  int number_ = 0;
};

bool is_blank_or_comment(const std::string& line) {
  const auto p = line.find_first_not_of(" \t");
  return p == std::string::npos || line[p] == '#';
}

template <typename... T>
void parse_fields(const LineReader& reader, std::istringstream& in, T&... out) {
  if (!(in >> ... >> out)) reader.fail("malformed line");
}

Vec3 read_vec3(const LineReader& reader, std::istringstream& in) {
  double x, y, z;
  parse_fields(reader, in, x, y, z);
  return Vec3(x, y, z);
}

void quaternion_of(const Mat3& r, double q[4]) {
  Eigen::Quaterniond quat(r);
  quat.normalize();
  if (quat.w() < 0) quat.coeffs() *= -1.0;
  q[0] = quat.w();
  q[1] = quat.x();
  q[2] = quat.y();
  q[3] = quat.z();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

fs::path colmap_model_dir(const fs::path& dir) {
  if (fs::exists(dir / "cameras.txt")) return dir;
  if (fs::exists(dir / "sparse" / "0" / "cameras.txt")) return dir / "sparse" / "0";
  throw std::runtime_error("missing file " + (dir / "cameras.txt").string());
}

}  // namespace

void SfmScene::validate() const {
  if (views.empty()) throw std::invalid_argument("scene has no views");
  for (const auto& [id, intr] : cameras) intr.validate();
  for (const SfmView& v : views) {
    if (!cameras.count(v.camera_id)) {
      throw std::invalid_argument("view " + v.name + " references unknown camera " +
                                  std::to_string(v.camera_id));
    }
    v.pose.validate();
  }
}

Camera SfmScene::camera(std::size_t view) const {
  const SfmView& v = views.at(view);
  return Camera{cameras.at(v.camera_id), v.pose};
}

fs::path SfmScene::image_path(std::size_t view) const {
  const fs::path& p = views.at(view).image;
  return p.is_absolute() ? p : root / p;
}

std::vector<std::size_t> SfmScene::train_views() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < views.size(); ++i)
    if (!views[i].holdout) out.push_back(i);
  return out;
}

std::vector<std::size_t> SfmScene::test_views() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < views.size(); ++i)
    if (views[i].holdout) out.push_back(i);
  return out;
}

SfmScene load_colmap(const fs::path& dir) {
  const fs::path model = colmap_model_dir(dir);
  SfmScene scene;
  scene.root = dir;
  std::string line;

  LineReader cams(model / "cameras.txt");
  while (cams.next(&line)) {
    if (is_blank_or_comment(line)) continue;
    std::istringstream in(line);
    int id, width, height;
    std::string kind;
    parse_fields(cams, in, id, kind, width, height);
    CameraIntrinsics intr;
    intr.width = width;
    intr.height = height;
    if (kind == "PINHOLE") {
      parse_fields(cams, in, intr.fx, intr.fy, intr.cx, intr.cy);
    } else if (kind == "SIMPLE_PINHOLE") {
      parse_fields(cams, in, intr.fx, intr.cx, intr.cy);
      intr.fy = intr.fx;
    } else {
      cams.fail("unsupported camera model " + kind);
    }
    try {
      intr.validate();
    } catch (const std::invalid_argument& e) {
      cams.fail(e.what());
    }
    scene.cameras[id] = intr;
  }

  // Each image occupies two lines; the second (2D points) may be empty.
  LineReader imgs(model / "images.txt");
  while (imgs.next(&line)) {
    if (is_blank_or_comment(line)) continue;
    std::istringstream in(line);
    int image_id, camera_id;
    double qw, qx, qy, qz, tx, ty, tz;
    std::string name;
    parse_fields(imgs, in, image_id, qw, qx, qy, qz, tx, ty, tz, camera_id, name);
    SfmView view;
    const double norm = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    if (!(norm > 0.0)) imgs.fail("zero quaternion");
    view.pose = CameraPose::from_quaternion(qw / norm, qx / norm, qy / norm, qz / norm,
                                            Vec3(tx, ty, tz));
    view.camera_id = camera_id;
    view.name = name;
    view.image = fs::path("images") / name;
    if (!scene.cameras.count(camera_id)) {
      imgs.fail("unknown camera id " + std::to_string(camera_id));
    }
    scene.views.push_back(view);
    imgs.next(&line);
  }

  LineReader pts(model / "points3D.txt");
  while (pts.next(&line)) {
    if (is_blank_or_comment(line)) continue;
    std::istringstream in(line);
    long long id;
    double x, y, z;
    int r, g, b;
    parse_fields(pts, in, id, x, y, z, r, g, b);
    scene.points.push_back({Vec3(x, y, z), Vec3(r, g, b) / 255.0});
  }

  std::sort(scene.views.begin(), scene.views.end(),
            [](const SfmView& a, const SfmView& b) { return a.name < b.name; });
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    scene.views[i].holdout = scene.views.size() > 1 && i % kHoldoutEvery == 0;
  }
  scene.validate();
  return scene;
}

SfmScene load_native(const fs::path& file) {
  SfmScene scene;
  scene.root = file.parent_path();
  LineReader reader(file);
  std::string line;
  while (reader.next(&line)) {
    if (is_blank_or_comment(line)) continue;
    std::istringstream in(line);
    std::string tag;
    in >> tag;
    if (tag == "camera") {
      int id;
      CameraIntrinsics intr;
      parse_fields(reader, in, id, intr.width, intr.height, intr.fx, intr.fy, intr.cx, intr.cy);
      scene.cameras[id] = intr;
    } else if (tag == "view") {
      SfmView v;
      std::string split, image;
      double q[4];
      parse_fields(reader, in, v.camera_id, split, q[0], q[1], q[2], q[3]);
      const Vec3 t = read_vec3(reader, in);
      parse_fields(reader, in, image);
      if (split != "train" && split != "test") reader.fail("split must be train or test");
      v.holdout = split == "test";
      v.pose = CameraPose::from_quaternion(q[0], q[1], q[2], q[3], t);
      v.image = image;
      v.name = fs::path(image).filename().string();
      scene.views.push_back(v);
    } else if (tag == "point") {
      SfmPoint p;
      p.position = read_vec3(reader, in);
      p.rgb = read_vec3(reader, in);
      scene.points.push_back(p);
    } else if (tag == "bounds") {
      Bounds b;
      b.lo = read_vec3(reader, in);
      b.hi = read_vec3(reader, in);
      scene.bounds = b;
    } else {
      reader.fail("unknown record " + tag);
    }
  }
  try {
    scene.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
  return scene;
}

void save_native(const SfmScene& scene, const fs::path& file) {
  std::ofstream out = open_output(file);
  out << "# trisplat scene\n";
  for (const auto& [id, c] : scene.cameras) {
    out << "camera " << id << ' ' << c.width << ' ' << c.height << ' ' << c.fx << ' '
        << c.fy << ' ' << c.cx << ' ' << c.cy << '\n';
  }
  for (const SfmView& v : scene.views) {
    double q[4];
    quaternion_of(v.pose.rotation, q);
    const Vec3& t = v.pose.translation;
    out << "view " << v.camera_id << ' ' << (v.holdout ? "test" : "train") << ' ' << q[0]
        << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' ' << t.x() << ' ' << t.y() << ' '
        << t.z() << ' ' << v.image.generic_string() << '\n';
  }
  if (scene.bounds) {
    const Bounds& b = *scene.bounds;
    out << "bounds " << b.lo.x() << ' ' << b.lo.y() << ' ' << b.lo.z() << ' ' << b.hi.x()
        << ' ' << b.hi.y() << ' ' << b.hi.z() << '\n';
  }
  for (const SfmPoint& p : scene.points) {
    out << "point " << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z()
        << ' ' << p.rgb.x() << ' ' << p.rgb.y() << ' ' << p.rgb.z() << '\n';
  }
}

void save_colmap(const SfmScene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream cams = open_output(dir / "cameras.txt");
  cams << "# CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  for (const auto& [id, c] : scene.cameras) {
    cams << id << " PINHOLE " << c.width << ' ' << c.height << ' ' << c.fx << ' ' << c.fy
         << ' ' << c.cx << ' ' << c.cy << '\n';
  }
  std::ofstream imgs = open_output(dir / "images.txt");
  imgs << "# IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
       << "# POINTS2D[] as (X, Y, POINT3D_ID)\n";
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    const SfmView& v = scene.views[i];
    double q[4];
    quaternion_of(v.pose.rotation, q);
    const Vec3& t = v.pose.translation;
    imgs << i + 1 << ' ' << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' ' << t.x()
         << ' ' << t.y() << ' ' << t.z() << ' ' << v.camera_id << ' ' << v.name << "\n\n";
  }
  std::ofstream pts = open_output(dir / "points3D.txt");
  pts << "# POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[]\n";
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const SfmPoint& p = scene.points[i];
    pts << i + 1 << ' ' << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z();
    for (int c = 0; c < 3; ++c) pts << ' ' << static_cast<int>(quantize_unit(p.rgb[c]));
    pts << " 0\n";
  }
}

SfmScene load_scene(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return load_native(dir);
  if (fs::exists(dir / "scene.txt")) return load_native(dir / "scene.txt");
  return load_colmap(dir);
}

ImageBuffer load_view_image(const SfmScene& scene, std::size_t view) {
  ImageBuffer image = load_png(scene.image_path(view));
  const CameraIntrinsics& intr = scene.cameras.at(scene.views[view].camera_id);
  if (image.width != intr.width || image.height != intr.height) {
    throw std::runtime_error(scene.image_path(view).string() + ": image is " +
                             std::to_string(image.width) + "x" + std::to_string(image.height) +
                             " but the camera is " + std::to_string(intr.width) + "x" +
                             std::to_string(intr.height));
  }
  return image;
}

}  // namespace trisplat
