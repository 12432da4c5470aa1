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

#ifndef TRISPLAT_DENSITY_HPP_
#define TRISPLAT_DENSITY_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <random>
#include <vector>

#include "trisplat/render.hpp"
#include "trisplat/triangle.hpp"

namespace trisplat {

struct DensifyConfig {
  double tau_prune = 0.022;
  int min_views = 2;
  int min_pixels = 2;
  double growth_rate = 0.30;
  int interval = 500;
  int start_iter = 500;
  int stop_iter = 25000;
  double tau_small = 24.0;  // mean screen area in pixels^2
  double max_noise_factor = 1.5;
  double opacity_dead = 0.014;
  std::size_t max_triangles = 2'000'000;

  void validate() const;
  bool is_step(int iteration) const;
};

// Per-triangle statistics gathered over the training views rendered since
// the last density step.
class DensityStats {
 public:
  DensityStats() = default;
  DensityStats(std::size_t triangles, int num_views);

  void reset(std::size_t triangles, int num_views);
  void record(int view, const PreparedScene& scene, const RenderOutput& out,
              int min_pixels);

  std::size_t size() const { return max_weight_.size(); }
  double max_weight(std::size_t i) const { return max_weight_[i]; }
  int views_seen(std::size_t i) const;
  double mean_screen_area(std::size_t i) const;

  // Test hooks for crafted statistics.
  void set_max_weight(std::size_t i, double w) { max_weight_[i] = w; }
  void mark_view(std::size_t i, int view);
  void add_screen_area(std::size_t i, double area);

 private:
  int words_ = 1;
  std::vector<double> max_weight_;
  std::vector<std::uint64_t> view_bits_;
  std::vector<double> area_sum_;
  std::vector<std::uint32_t> area_count_;
};

enum class PruneReason : std::uint8_t { kKept, kLowWeight, kFewViews, kDead };

struct PruneReport {
  std::vector<PruneReason> reasons;  // per input triangle
  std::vector<std::size_t> kept;     // input indices, ascending
  std::size_t removed() const { return reasons.size() - kept.size(); }
  std::size_t count(PruneReason r) const;
};

PruneReport prune(std::span<const Triangle3D> triangles,
                  const DensityStats& stats, const DensifyConfig& cfg);

enum class SampleCriterion { kInverseSigma, kOpacity };

std::vector<std::size_t> sample_candidates(std::span<const Triangle3D> triangles,
                                           std::span<const std::size_t> alive,
                                           std::size_t count,
                                           SampleCriterion criterion,
                                           std::mt19937_64& rng);

std::optional<std::array<Triangle3D, 4>> midpoint_subdivide(const Triangle3D& tri);

Triangle3D clone_with_noise(const Triangle3D& tri, std::mt19937_64& rng,
                            double max_noise_factor);

struct DensifyResult {
  std::vector<Triangle3D> triangles;
  // Input index for carried-over triangles, -1 for new ones.
  std::vector<std::int64_t> origin;
  PruneReport prune;
  std::size_t splits = 0;
  std::size_t clones = 0;
  std::size_t added() const { return 3 * splits + clones; }
};

// `step` counts density steps so far; even steps sample by inverse sigma,
// odd steps by opacity.
DensifyResult densify_step(std::span<const Triangle3D> triangles,
                           const DensityStats& stats, int iteration, int step,
                           const DensifyConfig& cfg, std::mt19937_64& rng);

}  // namespace trisplat

#endif  // TRISPLAT_DENSITY_HPP_
