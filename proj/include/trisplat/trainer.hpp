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

#ifndef TRISPLAT_TRAINER_HPP_
#define TRISPLAT_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "trisplat/density.hpp"
#include "trisplat/init.hpp"
#include "trisplat/loss.hpp"
#include "trisplat/scene.hpp"

namespace trisplat {

struct LearningRates {
  double feature = 0.0025;   // SH degree-0 band
  double opacity = 0.014;
  double vertex_init = 0.0018;
  double vertex_final_factor = 0.01;
  double sigma = 0.0008;
  double sh_rest_factor = 1.0 / 20.0;  // higher SH bands run at feature / 20
  double spatial_scale = 0.0;  // multiplies the vertex rate; 0 = camera extent

  void validate() const;
  double vertex_at(int iteration, int total) const;
};

struct TrainConfig {
  int iterations = 30000;
  LearningRates lr;
  LossWeights weights;
  DensifyConfig densify;
  InitConfig init;
  int distortion_from = 3000;
  int normal_from = 3000;
  int sh_degree_interval = 1000;
  int max_sh_degree = kMaxShDegree;
  // Final phase that drives triangles solid for mesh export; 0 disables it.
  int anneal_iterations = 5000;
  double sigma_solid = 0.05;
  double anneal_weight = 0.1;
  WindowMode mode = WindowMode::kNormalized;
  Vec3 background = Vec3::Zero();
  std::uint64_t seed = 0;
  int log_every = 100;

  static TrainConfig outdoor();
  static TrainConfig indoor();

  void validate() const;
  // Sets one key (names listed in the README).
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> snapshot() const;
};

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

inline constexpr double kOpacityMin = 1e-4;
inline constexpr double kOpacityMax = 1.0 - 1e-4;
inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 1e3;

class AdamState {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-15;

  explicit AdamState(std::size_t triangles = 0);

  std::size_t size() const { return m_.size(); }
  long step_count() const { return t_; }
  double first_moment(std::size_t tri, int k) const { return m_[tri][k]; }
  double second_moment(std::size_t tri, int k) const { return v_[tri][k]; }

  // Keeps moments of carried-over triangles (origin >= 0), zeroes new ones.
  void remap(std::span<const std::int64_t> origin);

 private:
  friend void adam_step(std::span<Triangle3D>, const GradientSet&, AdamState*,
                        const std::array<double, kParamsPerTriangle>&);
  using Row = std::array<double, kParamsPerTriangle>;
  std::vector<Row> m_;
  std::vector<Row> v_;
  long t_ = 0;
};

// Per-parameter learning rates for the current iteration.
std::array<double, kParamsPerTriangle> parameter_rates(const LearningRates& lr, int iteration,
                                                       int total);

// Bias-corrected Adam; clamps opacity and sigma afterwards. Throws on a
// non-finite gradient, naming the triangle and parameter.
void adam_step(std::span<Triangle3D> triangles, const GradientSet& grads, AdamState* state,
               const std::array<double, kParamsPerTriangle>& rates);

struct MetricsRecord {
  int iteration = 0;
  double loss = 0.0;
  double l1 = 0.0;
  double dssim = 0.0;
  double psnr = 0.0;
  std::size_t triangles = 0;
};

inline constexpr const char* kMetricsHeader = "iteration,loss,l1,dssim,psnr,triangles";
std::string format_metrics(const MetricsRecord& r);

struct TrainResult {
  std::vector<Triangle3D> triangles;
  std::vector<MetricsRecord> log;
  std::vector<double> loss_history;  // total loss at every iteration
  bool solid = false;
  // Model as it stood when the anneal phase began (empty if it never ran).
  std::vector<Triangle3D> pre_anneal;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

// Images are indexed like scene.views; held-out entries may be empty.
TrainResult train(const SfmScene& scene, const std::vector<ImageBuffer>& images,
                  std::vector<Triangle3D> triangles, const TrainConfig& cfg,
                  const MetricsSink& sink = {});

// Runs cfg.anneal_iterations of the anneal phase on an already trained
// model, then prunes and solidifies it.
TrainResult anneal_for_export(const SfmScene& scene, const std::vector<ImageBuffer>& images,
                              std::vector<Triangle3D> triangles, const TrainConfig& cfg,
                              const MetricsSink& sink = {});

// Drops triangles with o < tau_prune, sets o = 1 and clears SH bands above 0.
std::vector<Triangle3D> solidify(std::span<const Triangle3D> triangles, double tau_prune);

// Camera-spread radius used to scale position learning rates.
double scene_extent(const SfmScene& scene);

}  // namespace trisplat

#endif  // TRISPLAT_TRAINER_HPP_
