// Copyright 2026 rigidkit contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rigidkit/segment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "rigidkit/errors.hpp"

namespace rigidkit::segment {
namespace {

bool exceeds(const FieldD* cost, int i, int j, double threshold) {
  if (!cost) return false;
  const double v = cost->at(i, j);
  return std::isfinite(v) && v > threshold;
}

}  // namespace

LabelField segment_moving(const RigidityCosts& costs, const ThresholdConfig& cfg) {
  const FieldD* first = cfg.use_hom_instead_of_epi ? costs.hom : costs.epi;
  const FieldD* any = first ? first : (costs.pp3d ? costs.pp3d : costs.depth);
  if (!any) throw std::invalid_argument("segment_moving: no cost maps supplied");
  for (const FieldD* c : {costs.epi, costs.hom, costs.pp3d, costs.depth})
    if (c && !c->same_dims(*any))
      throw std::invalid_argument("segment_moving: dimension mismatch");

  const double t_first = cfg.use_hom_instead_of_epi ? cfg.t_hom : cfg.t_epi;
  LabelField moving(any->width(), any->height(), FieldKind::label, 0);
  for (int i = 0; i < any->height(); ++i)
    for (int j = 0; j < any->width(); ++j) {
      const bool hit = exceeds(first, i, j, t_first) || exceeds(costs.pp3d, i, j, cfg.t_pp3d) ||
                       exceeds(costs.depth, i, j, cfg.t_depth);
      moving.at(i, j) = hit ? 1 : 0;
    }
  return moving;
}

LabelField connected_components(const LabelField& moving, int min_area) {
  const int w = moving.width(), h = moving.height();
  LabelField labels(w, h, FieldKind::label, 0);
  std::vector<int> component_of(static_cast<std::size_t>(w) * h, -1);
  std::vector<int> areas;

  // First pass: flood fill in raster order, 4-connectivity.
  std::deque<std::pair<int, int>> queue;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (moving.at(i, j) == 0 || component_of[i * static_cast<std::size_t>(w) + j] >= 0)
        continue;
      const int comp = static_cast<int>(areas.size());
      areas.push_back(0);
      queue.emplace_back(i, j);
      component_of[i * static_cast<std::size_t>(w) + j] = comp;
      while (!queue.empty()) {
        const auto [ci, cj] = queue.front();
        queue.pop_front();
        ++areas[comp];
        constexpr int di[4] = {-1, 1, 0, 0};
        constexpr int dj[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ni = ci + di[k], nj = cj + dj[k];
          if (ni < 0 || ni >= h || nj < 0 || nj >= w) continue;
          auto& slot = component_of[ni * static_cast<std::size_t>(w) + nj];
          if (moving.at(ni, nj) == 0 || slot >= 0) continue;
          slot = comp;
          queue.emplace_back(ni, nj);
        }
      }
    }

  // Second pass: keep components meeting the area gate, ids in raster order.
  std::vector<int> id_of(areas.size(), 0);
  int next_id = 1;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const int comp = component_of[i * static_cast<std::size_t>(w) + j];
      if (comp < 0) continue;
      if (areas[comp] >= min_area && id_of[comp] == 0) id_of[comp] = next_id++;
      labels.at(i, j) = id_of[comp];
    }
  return labels;
}

PolarMask polar_encode(const LabelField& mask) {
  double su = 0.0, sv = 0.0;
  long n = 0;
  for (int i = 0; i < mask.height(); ++i)
    for (int j = 0; j < mask.width(); ++j)
      if (mask.at(i, j) != 0) {
        const Pixel p = pixel_center(i, j);
        su += p.u;
        sv += p.v;
        ++n;
      }
  if (n == 0) throw std::invalid_argument("polar_encode: empty mask");

  PolarMask pm;
  pm.center = {su / n, sv / n};
  const double t_max = std::hypot(mask.width(), mask.height());
  for (int k = 0; k < PolarMask::kAngles; ++k) {
    const double theta = 2.0 * kPi * k / PolarMask::kAngles;
    const double cu = std::cos(theta), cv = std::sin(theta);
    double farthest = 0.0;
    for (double t = 0.25; t <= t_max; t += 0.25) {
      const double u = pm.center.u + t * cu;
      const double v = pm.center.v + t * cv;
      const int j = static_cast<int>(std::floor(u));
      const int i = static_cast<int>(std::floor(v));
      if (i < 0 || i >= mask.height() || j < 0 || j >= mask.width()) break;
      if (mask.at(i, j) != 0) farthest = t;
    }
    pm.radii[k] = farthest;
  }
  return pm;
}

LabelField polar_decode(const PolarMask& pm, int width, int height) {
  LabelField mask(width, height, FieldKind::label, 0);
  std::array<Vec2, PolarMask::kAngles> verts;
  bool all_zero = true;
  for (int k = 0; k < PolarMask::kAngles; ++k) {
    const double theta = 2.0 * kPi * k / PolarMask::kAngles;
    if (!(pm.radii[k] >= 0.0) || !std::isfinite(pm.radii[k]))
      throw std::invalid_argument("polar_decode: radii must be finite and nonnegative");
    verts[k] = Vec2(pm.center.u + pm.radii[k] * std::cos(theta),
                    pm.center.v + pm.radii[k] * std::sin(theta));
    if (pm.radii[k] > 0.0) all_zero = false;
  }
  if (all_zero) return mask;

  // Even-odd scanline fill against the polygon edges.
  for (int i = 0; i < height; ++i) {
    const double y = i + 0.5;
    std::vector<double> crossings;
    for (int k = 0; k < PolarMask::kAngles; ++k) {
      const Vec2& a = verts[k];
      const Vec2& b = verts[(k + 1) % PolarMask::kAngles];
      if ((a.y() <= y) == (b.y() <= y)) continue;
      crossings.push_back(a.x() + (y - a.y()) / (b.y() - a.y()) * (b.x() - a.x()));
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const int j0 = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int j1 = std::min(width - 1, static_cast<int>(std::floor(crossings[k + 1] - 0.5)));
      for (int j = j0; j <= j1; ++j) mask.at(i, j) = 1;
    }
  }
  return mask;
}

LabelField resolve_stream_conflicts(const LabelField& background, const LabelField& labels) {
  if (!background.same_dims(labels))
    throw std::invalid_argument("resolve_stream_conflicts: dimension mismatch");
  LabelField out = labels;
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) {
      const int lab = labels.at(i, j);
      if (lab == kInvalidLabel) continue;
      const bool claims_background = background.at(i, j) != 0;
      const bool is_instance = lab > 0;
      if (claims_background == is_instance) out.at(i, j) = kInvalidLabel;
    }
  return out;
}

SegmentationResult build_segmentation(const LabelField& labels) {
  SegmentationResult result{LabelField(labels.width(), labels.height(), FieldKind::label, 0),
                            labels,
                            {}};
  int max_id = 0;
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) {
      const int lab = labels.at(i, j);
      if (lab != kInvalidLabel && lab > max_id) max_id = lab;
      if (lab == 0) result.background.at(i, j) = 1;
    }
  result.instances.resize(max_id);
  for (int id = 1; id <= max_id; ++id) result.instances[id - 1].id = id;
  std::vector<double> su(max_id + 1, 0.0), sv(max_id + 1, 0.0);
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) {
      const int lab = labels.at(i, j);
      if (lab <= 0 || lab == kInvalidLabel) continue;
      auto& inst = result.instances[lab - 1];
      ++inst.area;
      const Pixel p = pixel_center(i, j);
      su[lab] += p.u;
      sv[lab] += p.v;
    }
  for (auto& inst : result.instances)
    if (inst.area > 0) inst.centroid = {su[inst.id] / inst.area, sv[inst.id] / inst.area};
  return result;
}

}  // namespace rigidkit::segment
