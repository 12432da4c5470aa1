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

#include "trisplat/density.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace trisplat {

void DensifyConfig::validate() const {
  if (!(tau_prune > 0.0 && tau_prune < 1.0)) {
    throw std::invalid_argument("tau_prune must lie in (0, 1)");
  }
  if (!(growth_rate > 0.0)) throw std::invalid_argument("growth_rate must be positive");
  if (interval <= 0) throw std::invalid_argument("densify interval must be positive");
  if (min_views < 0 || min_pixels < 0) {
    throw std::invalid_argument("min_views and min_pixels must be non-negative");
  }
  if (!(max_noise_factor >= 0.0) || !(tau_small >= 0.0)) {
    throw std::invalid_argument("max_noise_factor and tau_small must be non-negative");
  }
}

bool DensifyConfig::is_step(int iteration) const {
  return iteration >= start_iter && iteration <= stop_iter && iteration % interval == 0;
}

DensityStats::DensityStats(std::size_t triangles, int num_views) {
  reset(triangles, num_views);
}

void DensityStats::reset(std::size_t triangles, int num_views) {
  words_ = std::max(1, (num_views + 63) / 64);
  max_weight_.assign(triangles, 0.0);
  view_bits_.assign(triangles * words_, 0);
  area_sum_.assign(triangles, 0.0);
  area_count_.assign(triangles, 0);
}

void DensityStats::mark_view(std::size_t i, int view) {
  if (view < 0 || view >= 64 * words_) throw std::out_of_range("view id out of range");
  view_bits_[i * words_ + view / 64] |= std::uint64_t{1} << (view % 64);
}

void DensityStats::add_screen_area(std::size_t i, double area) {
  area_sum_[i] += area;
  ++area_count_[i];
}

void DensityStats::record(int view, const PreparedScene& scene,
                          const RenderOutput& out, int min_pixels) {
  if (scene.triangle_count != size()) {
    throw std::invalid_argument("density stats do not match the scene");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    max_weight_[i] = std::max(max_weight_[i], out.max_weight[i]);
    if (static_cast<int>(out.pixel_count[i]) >= min_pixels) mark_view(i, view);
  }
  for (const Splat& s : scene.splats) add_screen_area(s.proj.source_index, s.proj.area());
}

int DensityStats::views_seen(std::size_t i) const {
  int n = 0;
  for (int w = 0; w < words_; ++w) n += std::popcount(view_bits_[i * words_ + w]);
  return n;
}

double DensityStats::mean_screen_area(std::size_t i) const {
  return area_count_[i] ? area_sum_[i] / area_count_[i] : 0.0;
}

std::size_t PruneReport::count(PruneReason r) const {
  return static_cast<std::size_t>(std::count(reasons.begin(), reasons.end(), r));
}

PruneReport prune(std::span<const Triangle3D> triangles,
                  const DensityStats& stats, const DensifyConfig& cfg) {
  if (stats.size() != triangles.size()) {
    throw std::invalid_argument("density stats do not match the triangle list");
  }
  PruneReport report;
  report.reasons.resize(triangles.size(), PruneReason::kKept);
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    PruneReason r = PruneReason::kKept;
    if (stats.max_weight(i) < cfg.tau_prune) {
      r = PruneReason::kLowWeight;
    } else if (stats.views_seen(i) < cfg.min_views) {
      r = PruneReason::kFewViews;
    } else if (triangles[i].opacity < cfg.opacity_dead) {
      r = PruneReason::kDead;
    }
    report.reasons[i] = r;
    if (r == PruneReason::kKept) report.kept.push_back(i);
  }
  return report;
}

std::vector<std::size_t> sample_candidates(std::span<const Triangle3D> triangles,
                                           std::span<const std::size_t> alive,
                                           std::size_t count,
                                           SampleCriterion criterion,
                                           std::mt19937_64& rng) {
  count = std::min(count, alive.size());
  if (count == 0) return {};
  // Weighted sampling without replacement: keep the largest log(u) / w.
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(alive.size());
  for (const std::size_t i : alive) {
    const Triangle3D& t = triangles[i];
    const double w = criterion == SampleCriterion::kInverseSigma ? 1.0 / t.sigma : t.opacity;
    double u = uniform(rng);
    while (u == 0.0) u = uniform(rng);
    const double key = w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity();
    keys.emplace_back(key, i);
  }
  std::partial_sort(keys.begin(), keys.begin() + count, keys.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<std::size_t> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = keys[k].second;
  return out;
}

std::optional<std::array<Triangle3D, 4>> midpoint_subdivide(const Triangle3D& tri) {
  const auto& v = tri.vertices;
  const double scale = std::max({v[0].norm(), v[1].norm(), v[2].norm(), 1.0});
  if (!(tri.cross().norm() > 1e-12 * scale * scale)) return std::nullopt;
  const Vec3 m01 = 0.5 * (v[0] + v[1]);
  const Vec3 m12 = 0.5 * (v[1] + v[2]);
  const Vec3 m20 = 0.5 * (v[2] + v[0]);
  std::array<Triangle3D, 4> children{tri, tri, tri, tri};
  // Same winding as the parent for every child.
  children[0].vertices = {v[0], m01, m20};
  children[1].vertices = {m01, v[1], m12};
  children[2].vertices = {m20, m12, v[2]};
  children[3].vertices = {m01, m12, m20};
  return children;
}

Triangle3D clone_with_noise(const Triangle3D& tri, std::mt19937_64& rng,
                            double max_noise_factor) {
  Triangle3D out = tri;
  const auto& v = tri.vertices;
  const double mean_edge =
      ((v[1] - v[0]).norm() + (v[2] - v[1]).norm() + (v[0] - v[2]).norm()) / 3.0;
  const double radius = max_noise_factor * mean_edge;
  const Vec3 c = tri.cross();
  if (!(radius > 0.0) || !(c.norm() > 0.0)) return out;
  const Vec3 e1 = (v[1] - v[0]).normalized();
  const Vec3 e2 = c.normalized().cross(e1);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double r = radius * std::sqrt(uniform(rng));
  const double theta = 2.0 * std::numbers::pi * uniform(rng);
  const Vec3 shift = r * (std::cos(theta) * e1 + std::sin(theta) * e2);
  for (auto& p : out.vertices) p += shift;
  return out;
}

DensifyResult densify_step(std::span<const Triangle3D> triangles,
                           const DensityStats& stats, int iteration, int step,
                           const DensifyConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  DensifyResult result;
  if (!cfg.is_step(iteration)) {
    result.triangles.assign(triangles.begin(), triangles.end());
    result.origin.resize(triangles.size());
    for (std::size_t i = 0; i < triangles.size(); ++i) result.origin[i] = static_cast<std::int64_t>(i);
    result.prune.reasons.assign(triangles.size(), PruneReason::kKept);
    for (std::size_t i = 0; i < triangles.size(); ++i) result.prune.kept.push_back(i);
    return result;
  }

  result.prune = prune(triangles, stats, cfg);
  const std::vector<std::size_t>& alive = result.prune.kept;
  // Growth is measured against the population entering the step.
  std::size_t target = static_cast<std::size_t>(
      std::ceil(cfg.growth_rate * static_cast<double>(triangles.size()) - 1e-9));
  const std::size_t room = cfg.max_triangles > alive.size() ? cfg.max_triangles - alive.size() : 0;
  target = std::min(target, room);

  const SampleCriterion criterion =
      step % 2 == 0 ? SampleCriterion::kInverseSigma : SampleCriterion::kOpacity;
  const std::vector<std::size_t> picks =
      sample_candidates(triangles, alive, target, criterion, rng);

  std::vector<char> split(triangles.size(), 0);
  std::vector<Triangle3D> extra;
  std::size_t remaining = target;
  for (const std::size_t i : picks) {
    if (remaining == 0) break;
    if (remaining >= 3 && stats.mean_screen_area(i) >= cfg.tau_small) {
      if (auto children = midpoint_subdivide(triangles[i])) {
        split[i] = 1;
        extra.insert(extra.end(), children->begin(), children->end());
        remaining -= 3;
        ++result.splits;
        continue;
      }
    }
    extra.push_back(clone_with_noise(triangles[i], rng, cfg.max_noise_factor));
    remaining -= 1;
    ++result.clones;
  }

  for (const std::size_t i : alive) {
    if (split[i]) continue;
    result.triangles.push_back(triangles[i]);
    result.origin.push_back(static_cast<std::int64_t>(i));
  }
  for (const Triangle3D& t : extra) {
    result.triangles.push_back(t);
    result.origin.push_back(-1);
  }
  return result;
}

}  // namespace trisplat
