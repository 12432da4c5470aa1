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

#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "trisplat/image_io.hpp"
#include "trisplat/init.hpp"
#include "trisplat/mesh_io.hpp"
#include "trisplat/parallel.hpp"
#include "trisplat/render.hpp"
#include "trisplat/synthetic.hpp"

#ifndef TRISPLAT_GIT_DESCRIBE
#define TRISPLAT_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;

namespace trisplat::cli {
namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<ImageBuffer> load_images(const SfmScene& scene, bool holdout) {
  std::vector<ImageBuffer> images(scene.views.size());
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    if (scene.views[i].holdout == holdout) images[i] = load_view_image(scene, i);
  }
  return images;
}

RenderSettings model_settings(const ModelInfo& info) {
  RenderSettings s;
  s.mode = info.mode;
  s.sh_degree = info.sh_degree;
  return s;
}

std::pair<int, int> parse_resolution(const std::string& text) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || w <= 0 || h <= 0) {
    throw UsageError("resolution must look like 256x256");
  }
  return {w, h};
}

// View id into the scene, or a text file with a 3x4 world-to-camera matrix
// and an optional "intrinsics fx fy cx cy width height" line.
Camera resolve_pose(const std::string& pose, const std::optional<SfmScene>& scene) {
  if (!pose.empty() && pose.find_first_not_of("0123456789") == std::string::npos) {
    if (!scene) throw UsageError("--pose with a view id needs --scene");
    const std::size_t id = std::stoul(pose);
    if (id >= scene->views.size()) {
      throw UsageError("view id " + pose + " out of range (scene has " +
                       std::to_string(scene->views.size()) + " views)");
    }
    return scene->camera(id);
  }
  std::ifstream in(pose);
  if (!in) throw UsageError("cannot open pose file " + pose);
  Camera cam;
  int row = 0;
  bool have_intrinsics = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    if (first == "intrinsics") {
      auto& c = cam.intrinsics;
      if (!(ls >> c.fx >> c.fy >> c.cx >> c.cy >> c.width >> c.height)) {
        throw std::runtime_error(pose + ": malformed intrinsics line");
      }
      have_intrinsics = true;
      continue;
    }
    if (row >= 3) continue;  // optional homogeneous row
    double v[4];
    v[0] = std::stod(first);
    if (!(ls >> v[1] >> v[2] >> v[3])) throw std::runtime_error(pose + ": matrix rows need 4 values");
    for (int c = 0; c < 3; ++c) cam.pose.rotation(row, c) = v[c];
    cam.pose.translation[row] = v[3];
    ++row;
  }
  if (row < 3) throw std::runtime_error(pose + ": expected a 3x4 matrix");
  if (!have_intrinsics) {
    if (!scene) throw UsageError("pose file has no intrinsics line; pass --scene");
    cam.intrinsics = scene->cameras.begin()->second;
  }
  cam.intrinsics.validate();
  cam.pose.validate();
  return cam;
}

std::vector<Triangle3D> load_any_model(const fs::path& path, ModelInfo* info) {
  return load_model(path, info);
}

int cmd_train(const fs::path& scene_dir, const fs::path& out, const TrainConfig& cfg) {
  const SfmScene scene = load_scene(scene_dir);
  const std::vector<ImageBuffer> images = load_images(scene, false);
  fs::create_directories(out);

  nlohmann::json manifest;
  manifest["git_describe"] = TRISPLAT_GIT_DESCRIBE;
  manifest["seed"] = cfg.seed;
  manifest["scene"] = fs::absolute(scene_dir).string();
  manifest["threads"] = worker_threads();
  manifest["config"] = cfg.snapshot();
  manifest["metrics"] = "metrics.csv";
  manifest["outputs"] = {{"model", "model.ply"}, {"solid_model", "solid.ply"}};
  {
    std::ofstream m(out / "manifest.json");
    if (!m) throw std::runtime_error("cannot write " + (out / "manifest.json").string());
    m << manifest.dump(2) << "\n";
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<Triangle3D> init = init_triangles(scene, cfg.init, rng);
  std::ofstream metrics(out / "metrics.csv");
  metrics << kMetricsHeader << "\n";
  TrainResult result = train(scene, images, std::move(init), cfg, [&](const MetricsRecord& r) {
    metrics << format_metrics(r) << "\n";
    metrics.flush();
  });

  ModelInfo info;
  info.mode = cfg.mode;
  info.sh_degree = cfg.max_sh_degree;
  if (result.solid) {
    save_model(result.pre_anneal, info, out / "model.ply");
    ModelInfo solid_info = info;
    solid_info.sh_degree = 0;
    solid_info.solid = true;
    save_model(result.triangles, solid_info, out / "solid.ply");
  } else {
    save_model(result.triangles, info, out / "model.ply");
  }
  std::cout << "trained " << result.triangles.size() << " triangles -> " << out.string() << "\n";
  return 0;
}

int cmd_render(const fs::path& model, const std::string& pose,
               const std::optional<fs::path>& scene_dir, const fs::path& out) {
  ModelInfo info;
  const std::vector<Triangle3D> tris = load_any_model(model, &info);
  std::optional<SfmScene> scene;
  if (scene_dir) scene = load_scene(*scene_dir);
  const Camera cam = resolve_pose(pose, scene);
  save_png(render(tris, cam, model_settings(info)).image, out);
  return 0;
}

int cmd_eval(const fs::path& model, const fs::path& scene_dir, const fs::path& out) {
  ModelInfo info;
  const std::vector<Triangle3D> tris = load_any_model(model, &info);
  const SfmScene scene = load_scene(scene_dir);
  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out.string());
  csv << "view,psnr,ssim\n";
  double sum_psnr = 0.0, sum_ssim = 0.0;
  const auto views = scene.test_views();
  for (const std::size_t v : views) {
    const ImageBuffer target = load_view_image(scene, v);
    const ImageBuffer img = render(tris, scene.camera(v), model_settings(info)).image;
    const ImageMetrics m = compute_metrics(img, target);
    csv << scene.views[v].name << ',' << m.psnr << ',' << m.ssim << "\n";
    sum_psnr += m.psnr;
    sum_ssim += m.ssim;
  }
  if (!views.empty()) {
    const double n = static_cast<double>(views.size());
    csv << "mean," << sum_psnr / n << ',' << sum_ssim / n << "\n";
    std::cout << "held-out views: " << views.size() << "  PSNR " << sum_psnr / n << " dB  SSIM "
              << sum_ssim / n << "\n";
  }
  return 0;
}

int cmd_export(const fs::path& model, const std::string& format, const fs::path& out) {
  ModelInfo info;
  const std::vector<Triangle3D> tris = load_any_model(model, &info);
  export_mesh(tris, out, parse_mesh_format(format));
  std::cout << "exported " << tris.size() << " triangles\n";
  return 0;
}

int cmd_bench(const fs::path& model, const std::string& resolution, int frames) {
  ModelInfo info;
  const std::vector<Triangle3D> tris = load_any_model(model, &info);
  const auto [w, h] = parse_resolution(resolution);
  Vec3 lo = Vec3::Constant(1e300), hi = -lo;
  for (const Triangle3D& t : tris) {
    for (const Vec3& v : t.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  if (tris.empty()) lo = hi = Vec3::Zero();
  const Vec3 center = 0.5 * (lo + hi);
  const double radius = std::max(0.5 * (hi - lo).norm(), 1e-3);
  Camera cam;
  cam.intrinsics.width = w;
  cam.intrinsics.height = h;
  cam.intrinsics.fx = cam.intrinsics.fy = std::max(w, h);
  cam.intrinsics.cx = 0.5 * w;
  cam.intrinsics.cy = 0.5 * h;
  cam.intrinsics.z_near = 1e-3 * radius;
  cam.pose = CameraPose::look_at(center + Vec3(0.0, -2.2 * radius, 0.8 * radius), center,
                                 Vec3::UnitZ());
  const RenderSettings settings = model_settings(info);
  render(tris, cam, settings);  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < frames; ++i) render(tris, cam, settings);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double ms = 1e3 * secs / std::max(1, frames);
  std::cout << tris.size() << " triangles at " << w << "x" << h << ": " << ms << " ms/frame, "
            << (ms > 0 ? 1e3 / ms : 0.0) << " FPS, " << worker_threads() << " threads\n";
  return 0;
}

int cmd_synth(const std::string& kind, const fs::path& out, const std::string& resolution) {
  if (kind == "cube") {
    CubeSceneOptions opt;
    const auto [w, h] = parse_resolution(resolution);
    opt.width = w;
    opt.height = h;
    write_cube_scene(out, opt);
  } else if (kind == "tri3") {
    write_tri3_scene(out);
  } else {
    throw UsageError("unknown synthetic scene " + kind + " (expected cube or tri3)");
  }
  std::cout << "wrote " << kind << " scene to " << out.string() << "\n";
  return 0;
}

}  // namespace

TrainConfig resolve_config(bool indoor, const std::optional<fs::path>& file,
                           const std::map<std::string, std::string>& flags) {
  TrainConfig cfg = indoor ? TrainConfig::indoor() : TrainConfig::outdoor();
  if (file) {
    for (const auto& [key, value] : read_config_file(*file)) cfg.set(key, value);
  }
  for (const auto& [key, value] : flags) cfg.set(key, value);
  cfg.validate();
  return cfg;
}

int run(int argc, char** argv) {
  configure_threads_from_env();
  CLI::App app{"trisplat: triangle splatting trainer and renderer"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "optimize triangles on a scene");
  std::string scene_dir, out, config, window, iterations, seed;
  bool indoor = false, outdoor = false;
  train_cmd->add_option("scene_dir", scene_dir, "scene directory")->required()->check(CLI::ExistingPath);
  train_cmd->add_option("--out", out, "output directory")->required();
  train_cmd->add_option("--config", config, "key=value config file")->check(CLI::ExistingFile);
  auto* in_flag = train_cmd->add_flag("--indoor", indoor, "indoor hyperparameter preset");
  auto* out_flag = train_cmd->add_flag("--outdoor", outdoor, "outdoor hyperparameter preset (default)");
  in_flag->excludes(out_flag);
  train_cmd->add_option("--window", window, "normalized or sigmoid")
      ->check(CLI::IsMember({"normalized", "sigmoid"}));
  train_cmd->add_option("--seed", seed, "random seed");
  train_cmd->add_option("--iterations", iterations, "training iterations");

  auto* render_cmd = app.add_subcommand("render", "render a model to PNG");
  std::string model, pose, render_scene;
  render_cmd->add_option("model", model, "model file")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--pose", pose, "view id or 3x4 matrix file")->required();
  render_cmd->add_option("--scene", render_scene, "scene for view ids / intrinsics")
      ->check(CLI::ExistingPath);
  render_cmd->add_option("--out", out, "output PNG")->required();

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM on held-out views");
  eval_cmd->add_option("model", model, "model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("scene_dir", scene_dir, "scene directory")->required()->check(CLI::ExistingPath);
  eval_cmd->add_option("--out", out, "output CSV")->required();

  auto* export_cmd = app.add_subcommand("export", "write a triangle soup mesh");
  std::string format = "ply";
  export_cmd->add_option("model", model, "model file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--format", format, "ply or obj")->check(CLI::IsMember({"ply", "obj"}));
  export_cmd->add_option("--out", out, "output mesh")->required();

  auto* bench_cmd = app.add_subcommand("bench", "forward render timing");
  std::string resolution = "256x256";
  int frames = 10;
  bench_cmd->add_option("model", model, "model file")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--resolution", resolution, "WxH");
  bench_cmd->add_option("--frames", frames, "timed frames")->check(CLI::PositiveNumber);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene");
  std::string kind = "cube", synth_res = "128x128";
  synth_cmd->add_option("--kind", kind, "cube or tri3");
  synth_cmd->add_option("--resolution", synth_res, "WxH (cube only)");
  synth_cmd->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*train_cmd) {
      std::map<std::string, std::string> flags;
      if (!window.empty()) flags["window"] = window;
      if (!seed.empty()) flags["seed"] = seed;
      if (!iterations.empty()) flags["iterations"] = iterations;
      std::optional<fs::path> file;
      if (!config.empty()) file = config;
      TrainConfig cfg;
      try {
        cfg = resolve_config(indoor, file, flags);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      return cmd_train(scene_dir, out, cfg);
    }
    if (*render_cmd) {
      std::optional<fs::path> s;
      if (!render_scene.empty()) s = render_scene;
      return cmd_render(model, pose, s, out);
    }
    if (*eval_cmd) return cmd_eval(model, scene_dir, out);
    if (*export_cmd) return cmd_export(model, format, out);
    if (*bench_cmd) return cmd_bench(model, resolution, frames);
    if (*synth_cmd) return cmd_synth(kind, out, synth_res);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}

}  // namespace trisplat::cli
