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

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "rigidkit/field.hpp"
#include "rigidkit/geometry.hpp"

namespace rigidkit::segment {

/// Per-cost decision thresholds. Defaults were calibrated once on noise-free
/// simulated scenes so that each degenerate-motion suite separates cleanly.
struct ThresholdConfig {
  double t_epi = 1.0;     // px^2
  double t_hom = 1.0;     // px^2
  double t_pp3d = 0.05;   // normalized-flow units
  double t_depth = 0.15;  // log-depth units
  int min_instance_area = 50;
  bool use_hom_instead_of_epi = false;  // set when egomotion is degenerate
};

/// Cost maps available for fusion; absent entries contribute no evidence.
struct RigidityCosts {
  const FieldD* epi = nullptr;
  const FieldD* hom = nullptr;
  const FieldD* pp3d = nullptr;
  const FieldD* depth = nullptr;
};

struct InstanceInfo {
  int id = 0;
  int area = 0;
  Pixel centroid{0, 0};
  std::optional<RigidTransform> transform;
  std::optional<double> scale;
  bool valid = false;
};

struct SegmentationResult {
  LabelField background;  // 1 = rigid background
  LabelField labels;      // 0 background, 1..N instances, kInvalidLabel no data
  std::vector<InstanceInfo> instances;
};

/// Star-convex instance mask: center plus 36 ray lengths at angles 2*pi*k/36.
struct PolarMask {
  static constexpr int kAngles = 36;
  Pixel center{0, 0};
  std::array<double, kAngles> radii{};
};

/// A pixel moves iff ANY available cost exceeds its threshold (each criterion
/// is a sufficient condition). Invalid (NaN) costs vote static. Uses either
/// the epipolar or the homography cost per cfg.use_hom_instead_of_epi.
LabelField segment_moving(const RigidityCosts& costs, const ThresholdConfig& cfg);

/// 4-connected components of a binary mask. Components below min_area merge
/// into the background; ids are assigned in raster order of first contact.
LabelField connected_components(const LabelField& moving, int min_area);

/// Encodes a nonempty binary mask as 36 centroid-anchored ray lengths
/// (farthest mask sample along each ray).
PolarMask polar_encode(const LabelField& mask);

/// Rasterizes the 36-gon by scanline fill. All-zero radii give an empty mask.
LabelField polar_decode(const PolarMask& pm, int width, int height);

/// Marks pixels where the background mask and the instance labels disagree
/// as invalid; everything else passes through.
LabelField resolve_stream_conflicts(const LabelField& background, const LabelField& labels);

/// Assembles labels + per-instance stats (areas, centroids).
SegmentationResult build_segmentation(const LabelField& labels);

}  // namespace rigidkit::segment
