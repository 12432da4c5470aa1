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

#include "trisplat/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "trisplat/backward.hpp"
#include "trisplat/image_io.hpp"
#include "trisplat/render.hpp"

namespace trisplat {
namespace {

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw std::invalid_argument("config key " + key + ": expected a number, got '" + value + "'");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    throw std::invalid_argument("config key " + key + ": expected an integer, got '" + value + "'");
  }
  return static_cast<int>(v);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct LoopSpec {
  int iterations = 0;
  bool densify = true;
  int anneal_begin = 0;  // first annealing iteration; > iterations disables
  bool vertex_lr_final = false;
};

double anneal_penalty(std::span<const Triangle3D> tris, double strength, double sigma_solid,
                      GradientSet* grads) {
  if (tris.empty() || strength <= 0.0) return 0.0;
  // Summed, not averaged: the pull on each triangle must not fade as the
  // population grows.
  double value = 0.0;
  for (std::size_t i = 0; i < tris.size(); ++i) {
    const double dop = 1.0 - tris[i].opacity;
    const double dsig = tris[i].sigma - sigma_solid;
    value += strength * (dop * dop + dsig * dsig);
    (*grads)[i].opacity() -= 2.0 * strength * dop;
    (*grads)[i].sigma() += 2.0 * strength * dsig;
  }
  return value;
}

TrainResult run_loop(const SfmScene& scene, const std::vector<ImageBuffer>& images,
                     std::vector<Triangle3D> tris, const TrainConfig& cfg_in,
                     const LoopSpec& spec, const MetricsSink& sink) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  scene.validate();
  if (images.size() != scene.views.size()) {
    throw std::invalid_argument("need one image slot per scene view");
  }
  const std::vector<std::size_t> train_views = scene.train_views();
  if (train_views.empty()) throw std::invalid_argument("scene has no training views");
  for (const std::size_t v : train_views) {
    const CameraIntrinsics& intr = scene.cameras.at(scene.views[v].camera_id);
    if (images[v].width != intr.width || images[v].height != intr.height) {
      throw std::invalid_argument("image of view " + scene.views[v].name +
                                  " does not match its camera");
    }
  }
  if (!(cfg.lr.spatial_scale > 0.0)) cfg.lr.spatial_scale = scene_extent(scene);

  std::mt19937_64 view_rng(cfg.seed);
  std::mt19937_64 density_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;

  TrainResult result;
  AdamState adam(tris.size());
  DensityStats stats(tris.size(), static_cast<int>(scene.views.size()));
  int density_steps = 0;
  const int anneal_len = std::max(0, spec.iterations - spec.anneal_begin + 1);

  for (int it = 1; it <= spec.iterations; ++it) {
    if (cursor == order.size()) {
      order = train_views;
      std::shuffle(order.begin(), order.end(), view_rng);
      cursor = 0;
    }
    const std::size_t view = order[cursor++];
    const bool annealing = it >= spec.anneal_begin;
    if (it == spec.anneal_begin) result.pre_anneal = tris;

    RenderSettings settings;
    settings.mode = cfg.mode;
    settings.background = cfg.background;
    settings.sh_degree =
        annealing ? 0 : std::min(cfg.max_sh_degree, it / std::max(1, cfg.sh_degree_interval));
    ObjectiveOptions options;
    options.distortion = it >= cfg.distortion_from && cfg.weights.beta_distortion > 0.0;
    options.normal = it >= cfg.normal_from && cfg.weights.beta_normal > 0.0;
    settings.collect_fragments = options.distortion || options.normal;

    const Camera camera = scene.camera(view);
    const PreparedScene prepared = prepare_scene(tris, camera, settings);
    const RenderOutput forward = render(prepared);
    const Objective obj =
        evaluate_objective(tris, prepared, forward, images[view], cfg.weights, options);
    GradientSet grads = render_backward(prepared, tris, forward, obj.upstream);
    accumulate(&grads, obj.direct);
    double loss = obj.total;
    if (annealing && anneal_len > 0) {
      const double ramp = static_cast<double>(it - spec.anneal_begin + 1) / anneal_len;
      loss += anneal_penalty(tris, cfg.anneal_weight * ramp, cfg.sigma_solid, &grads);
    }
    stats.record(static_cast<int>(view), prepared, forward, cfg.densify.min_pixels);

    auto rates = parameter_rates(cfg.lr, spec.vertex_lr_final ? spec.iterations : it,
                                 spec.iterations);
    adam_step(tris, grads, &adam, rates);
    result.loss_history.push_back(loss);

    if (it % std::max(1, cfg.log_every) == 0 || it == spec.iterations) {
      MetricsRecord rec;
      rec.iteration = it;
      rec.loss = loss;
      rec.l1 = obj.terms.l1;
      rec.dssim = obj.terms.dssim;
      rec.psnr = psnr(forward.image, images[view]);
      rec.triangles = tris.size();
      result.log.push_back(rec);
      if (sink) sink(rec);
    }

    if (spec.densify && !annealing && cfg.densify.is_step(it)) {
      DensifyResult d = densify_step(tris, stats, it, density_steps++, cfg.densify, density_rng);
      tris = std::move(d.triangles);
      adam.remap(d.origin);
      stats.reset(tris.size(), static_cast<int>(scene.views.size()));
    }
  }

  if (anneal_len > 0 && spec.anneal_begin <= spec.iterations) {
    result.triangles = solidify(tris, cfg.densify.tau_prune);
    result.solid = true;
  } else {
    result.triangles = std::move(tris);
  }
  return result;
}

}  // namespace

void LearningRates::validate() const {
  if (!(feature > 0.0 && opacity > 0.0 && vertex_init > 0.0 && sigma > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (!(vertex_final_factor > 0.0) || !(sh_rest_factor > 0.0) || !(spatial_scale >= 0.0)) {
    throw std::invalid_argument("learning-rate factors must be positive");
  }
}

double LearningRates::vertex_at(int iteration, int total) const {
  const double t = total > 0 ? std::clamp(static_cast<double>(iteration) / total, 0.0, 1.0) : 0.0;
  return spatial_scale * vertex_init * std::exp(t * std::log(vertex_final_factor));
}

TrainConfig TrainConfig::outdoor() { return TrainConfig{}; }

TrainConfig TrainConfig::indoor() {
  TrainConfig c;
  c.lr.vertex_init = 0.0015;
  c.weights.beta_normal = 0.00004;
  c.weights.beta_size = 5e-8;
  c.densify.tau_prune = 0.0256;
  return c;
}

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (anneal_iterations < 0) throw std::invalid_argument("anneal_iterations must be non-negative");
  if (!(sigma_solid > 0.0)) throw std::invalid_argument("sigma_solid must be positive");
  if (!(anneal_weight >= 0.0)) throw std::invalid_argument("anneal_weight must be non-negative");
  if (max_sh_degree < 0 || max_sh_degree > kMaxShDegree) {
    throw std::invalid_argument("sh_degree must lie in [0, 3]");
  }
  lr.validate();
  weights.validate();
  densify.validate();
  init.validate();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  auto d = [&] { return parse_double(key, value); };
  auto i = [&] { return parse_int(key, value); };
  if (key == "feature_lr") lr.feature = d();
  else if (key == "opacity_lr") lr.opacity = d();
  else if (key == "lr_convex_points_init") lr.vertex_init = d();
  else if (key == "lr_sigma") lr.sigma = d();
  else if (key == "lambda_normals") weights.beta_normal = d();
  else if (key == "lambda_opacity") weights.beta_opacity = d();
  else if (key == "lambda_size") weights.beta_size = d();
  else if (key == "max_noise_factor") densify.max_noise_factor = d();
  else if (key == "opacity_dead") densify.opacity_dead = d();
  else if (key == "split_size") densify.tau_small = d();
  else if (key == "importance_threshold") densify.tau_prune = d();
  else if (key == "iterations") iterations = i();
  else if (key == "lambda_dssim") weights.lambda_dssim = d();
  else if (key == "lambda_distortion") weights.beta_distortion = d();
  else if (key == "lr_vertex_final_factor") lr.vertex_final_factor = d();
  else if (key == "lr_sh_rest_factor") lr.sh_rest_factor = d();
  else if (key == "spatial_lr_scale") lr.spatial_scale = d();
  else if (key == "densify_interval") densify.interval = i();
  else if (key == "densify_from_iter") densify.start_iter = i();
  else if (key == "densify_until_iter") densify.stop_iter = i();
  else if (key == "growth_rate") densify.growth_rate = d();
  else if (key == "min_views") densify.min_views = i();
  else if (key == "min_pixels") densify.min_pixels = i();
  else if (key == "max_triangles") densify.max_triangles = static_cast<std::size_t>(std::max(0, i()));
  else if (key == "init_opacity") init.init_opacity = d();
  else if (key == "init_sigma") init.init_sigma = d();
  else if (key == "init_scale_k") init.k = d();
  else if (key == "init_knn") init.knn = i();
  else if (key == "init_random_points") init.fallback_points = i();
  else if (key == "distortion_from_iter") distortion_from = i();
  else if (key == "normal_from_iter") normal_from = i();
  else if (key == "sh_degree") max_sh_degree = i();
  else if (key == "sh_degree_interval") sh_degree_interval = i();
  else if (key == "anneal_iterations") anneal_iterations = i();
  else if (key == "sigma_solid") sigma_solid = d();
  else if (key == "anneal_weight") anneal_weight = d();
  else if (key == "log_every") log_every = i();
  else if (key == "seed") seed = static_cast<std::uint64_t>(parse_double(key, value));
  else if (key == "window") {
    if (value == "normalized") mode = WindowMode::kNormalized;
    else if (value == "sigmoid") mode = WindowMode::kSigmoid;
    else throw std::invalid_argument("config key window: expected normalized or sigmoid");
  } else if (key == "background") {
    std::istringstream in(value);
    Vec3 c;
    char sep1 = ',', sep2 = ',';
    if (!(in >> c.x() >> sep1 >> c.y() >> sep2 >> c.z()) || sep1 != ',' || sep2 != ',') {
      throw std::invalid_argument("config key background: expected r,g,b");
    }
    background = c;
  } else {
    throw std::invalid_argument("unknown config key " + key);
  }
}

std::map<std::string, std::string> TrainConfig::snapshot() const {
  return {
      {"feature_lr", num(lr.feature)},
      {"opacity_lr", num(lr.opacity)},
      {"lr_convex_points_init", num(lr.vertex_init)},
      {"lr_sigma", num(lr.sigma)},
      {"lambda_normals", num(weights.beta_normal)},
      {"lambda_opacity", num(weights.beta_opacity)},
      {"lambda_size", num(weights.beta_size)},
      {"max_noise_factor", num(densify.max_noise_factor)},
      {"opacity_dead", num(densify.opacity_dead)},
      {"split_size", num(densify.tau_small)},
      {"importance_threshold", num(densify.tau_prune)},
      {"iterations", std::to_string(iterations)},
      {"lambda_dssim", num(weights.lambda_dssim)},
      {"lambda_distortion", num(weights.beta_distortion)},
      {"lr_vertex_final_factor", num(lr.vertex_final_factor)},
      {"lr_sh_rest_factor", num(lr.sh_rest_factor)},
      {"spatial_lr_scale", num(lr.spatial_scale)},
      {"densify_interval", std::to_string(densify.interval)},
      {"densify_from_iter", std::to_string(densify.start_iter)},
      {"densify_until_iter", std::to_string(densify.stop_iter)},
      {"growth_rate", num(densify.growth_rate)},
      {"min_views", std::to_string(densify.min_views)},
      {"min_pixels", std::to_string(densify.min_pixels)},
      {"max_triangles", std::to_string(densify.max_triangles)},
      {"init_opacity", num(init.init_opacity)},
      {"init_sigma", num(init.init_sigma)},
      {"init_scale_k", num(init.k)},
      {"init_knn", std::to_string(init.knn)},
      {"init_random_points", std::to_string(init.fallback_points)},
      {"distortion_from_iter", std::to_string(distortion_from)},
      {"normal_from_iter", std::to_string(normal_from)},
      {"sh_degree", std::to_string(max_sh_degree)},
      {"sh_degree_interval", std::to_string(sh_degree_interval)},
      {"anneal_iterations", std::to_string(anneal_iterations)},
      {"sigma_solid", num(sigma_solid)},
      {"anneal_weight", num(anneal_weight)},
      {"log_every", std::to_string(log_every)},
      {"seed", std::to_string(seed)},
      {"window", mode == WindowMode::kSigmoid ? "sigmoid" : "normalized"},
      {"background", num(background.x()) + "," + num(background.y()) + "," + num(background.z())},
  };
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(number) +
                               ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

AdamState::AdamState(std::size_t triangles) : m_(triangles, Row{}), v_(triangles, Row{}) {}

void AdamState::remap(std::span<const std::int64_t> origin) {
  std::vector<Row> m(origin.size(), Row{}), v(origin.size(), Row{});
  for (std::size_t i = 0; i < origin.size(); ++i) {
    if (origin[i] < 0) continue;
    m[i] = m_.at(static_cast<std::size_t>(origin[i]));
    v[i] = v_.at(static_cast<std::size_t>(origin[i]));
  }
  m_ = std::move(m);
  v_ = std::move(v);
}

std::array<double, kParamsPerTriangle> parameter_rates(const LearningRates& lr, int iteration,
                                                       int total) {
  std::array<double, kParamsPerTriangle> rates{};
  const double vertex = lr.vertex_at(iteration, total);
  for (int k = 0; k < kParamsPerTriangle; ++k) {
    switch (parameter_group(k)) {
      case ParamGroup::kVertex: rates[k] = vertex; break;
      case ParamGroup::kOpacity: rates[k] = lr.opacity; break;
      case ParamGroup::kSigma: rates[k] = lr.sigma; break;
      case ParamGroup::kShDc: rates[k] = lr.feature; break;
      case ParamGroup::kShRest: rates[k] = lr.feature * lr.sh_rest_factor; break;
    }
  }
  return rates;
}

void adam_step(std::span<Triangle3D> triangles, const GradientSet& grads, AdamState* state,
               const std::array<double, kParamsPerTriangle>& rates) {
  if (grads.size() != triangles.size() || state->size() != triangles.size()) {
    throw std::invalid_argument("optimizer state does not match the triangle list");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (int k = 0; k < kParamsPerTriangle; ++k) {
      if (!std::isfinite(grads[i][k])) {
        throw std::runtime_error("non-finite gradient for triangle " + std::to_string(i) +
                                 ", parameter " + std::to_string(k));
      }
    }
  }
  ++state->t_;
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state->t_));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state->t_));
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    auto& m = state->m_[i];
    auto& v = state->v_[i];
    for (int k = 0; k < kParamsPerTriangle; ++k) {
      const double g = grads[i][k];
      m[k] = AdamState::kBeta1 * m[k] + (1.0 - AdamState::kBeta1) * g;
      v[k] = AdamState::kBeta2 * v[k] + (1.0 - AdamState::kBeta2) * g * g;
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      parameter(triangles[i], k) -= rates[k] * mhat / (std::sqrt(vhat) + AdamState::kEpsilon);
    }
    Triangle3D& t = triangles[i];
    t.opacity = std::clamp(t.opacity, kOpacityMin, kOpacityMax);
    t.sigma = std::clamp(t.sigma, kSigmaMin, kSigmaMax);
  }
}

std::string format_metrics(const MetricsRecord& r) {
  std::ostringstream out;
  out.precision(10);
  out << r.iteration << ',' << r.loss << ',' << r.l1 << ',' << r.dssim << ',' << r.psnr << ','
      << r.triangles;
  return out.str();
}

TrainResult train(const SfmScene& scene, const std::vector<ImageBuffer>& images,
                  std::vector<Triangle3D> triangles, const TrainConfig& cfg,
                  const MetricsSink& sink) {
  LoopSpec spec;
  spec.iterations = cfg.iterations;
  spec.anneal_begin = cfg.anneal_iterations > 0
                          ? std::max(1, cfg.iterations - cfg.anneal_iterations + 1)
                          : cfg.iterations + 1;
  return run_loop(scene, images, std::move(triangles), cfg, spec, sink);
}

TrainResult anneal_for_export(const SfmScene& scene, const std::vector<ImageBuffer>& images,
                              std::vector<Triangle3D> triangles, const TrainConfig& cfg,
                              const MetricsSink& sink) {
  LoopSpec spec;
  spec.iterations = cfg.anneal_iterations;
  spec.densify = false;
  spec.anneal_begin = 1;
  spec.vertex_lr_final = true;
  TrainResult r = run_loop(scene, images, std::move(triangles), cfg, spec, sink);
  if (!r.solid) {
    r.triangles = solidify(r.triangles, cfg.densify.tau_prune);
    r.solid = true;
  }
  return r;
}

std::vector<Triangle3D> solidify(std::span<const Triangle3D> triangles, double tau_prune) {
  std::vector<Triangle3D> out;
  for (const Triangle3D& t : triangles) {
    if (t.opacity < tau_prune) continue;
    Triangle3D s = t;
    s.opacity = 1.0;
    for (int k = 1; k < kShCoeffCount; ++k) s.sh[k].setZero();
    out.push_back(s);
  }
  return out;
}

double scene_extent(const SfmScene& scene) {
  Vec3 mean = Vec3::Zero();
  for (const SfmView& v : scene.views) mean += v.pose.center();
  mean /= static_cast<double>(std::max<std::size_t>(1, scene.views.size()));
  double radius = 0.0;
  for (const SfmView& v : scene.views) radius = std::max(radius, (v.pose.center() - mean).norm());
  return radius > 0.0 ? 1.1 * radius : 1.0;
}

}  // namespace trisplat
