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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rigidkit/field.hpp"
#include "rigidkit/geometry.hpp"

namespace rigidkit::rigidfit {

enum class TriangulationMethod { midpoint, dlt };

enum class FitStatus {
  ok,
  too_few_valid,      // < 50 confident pixels in the segment
  estimation_failed,  // essential fit found no model
  cheirality_failed,
  scale_rejected,     // scale RANSAC below 30% inliers
};

std::string to_string(FitStatus status);

/// Rigid motion of one segment. `transform` maps frame-0 points to frame-1
/// points (P1 = R * P0 + T) in prior-aligned metric units; `scale` converts
/// unit-baseline triangulated depth into the same units.
struct RigidBodyFit {
  int id = 0;
  RigidTransform transform;
  double scale = 0.0;
  std::size_t n_inliers = 0;
  double mean_parallax = 0.0;   // px, rotation-compensated flow magnitude
  double valid_fraction = 0.0;  // confident pixels / segment area
  bool updated = false;
  FitStatus status = FitStatus::ok;
  bool pnp_diverged = false;
};

struct SceneFlowOutput {
  FieldD z0;             // refined first-frame depth
  FieldD z1;             // second-frame depth of the same points
  FieldD flow_refined;   // px
  FieldD p1;             // 3ch frame-1 points
};

/// Two-view triangulation of a single match under the motion
/// x0 = rt.R * x1 + rt.T (metric baseline). Returns the frame-0 point.
/// Throws ZeroParallaxError for rays parallel within 1e-8 rad and
/// BehindCameraError for negative depth in either frame.
Point3 triangulate(const Pixel& p0, const Pixel& p1, const RigidTransform& rt,
                   const CameraIntrinsics& k0, const CameraIntrinsics& k1,
                   TriangulationMethod method = TriangulationMethod::midpoint);

/// Fits one segment: LMedS essential fit on its confident flow
/// correspondences, cheirality decomposition, per-pixel triangulation, and a
/// scale-ratio RANSAC against the depth prior. Failures come back as
/// updated = false with the reason in `status` (downstream passes the
/// segment through unchanged).
RigidBodyFit fit_segment(const LabelField& labels, const FieldD& flow, const FieldD& confidence,
                         const FieldD& z_prior, int seg_id, const CameraIntrinsics& k0,
                         const CameraIntrinsics& k1, std::uint64_t seed);

/// Levenberg-Marquardt pose refinement against trusted first-frame depth,
/// minimizing reprojection error of flow targets. Monotone: the returned fit
/// never has higher RMS reprojection error than the input.
RigidBodyFit refine_pnp_lm(const RigidBodyFit& fit, const FieldD& z0_trusted, const FieldD& flow,
                           const FieldD& confidence, const LabelField& labels,
                           const CameraIntrinsics& k0, const CameraIntrinsics& k1);

/// Update gate: mean parallax >= parallax_min (px) AND valid fraction >= 0.3.
bool gate_update(const RigidBodyFit& fit, double parallax_min = 4.0);

/// Composes per-segment rigid motions into dense refined depth and flow.
/// Updated segments get triangulated depth and P1 = R*P0 + T; everything
/// else passes the inputs through (Z1 = Z_prior * tau).
SceneFlowOutput assemble_scene_flow(const LabelField& labels,
                                    const std::map<int, RigidBodyFit>& fits,
                                    const FieldD& z_prior, const FieldD& flow,
                                    const FieldD& expansion, const CameraIntrinsics& k0,
                                    const CameraIntrinsics& k1, int threads = 1);

/// Mean rotation-compensated flow magnitude over a pixel set, px.
double mean_parallax_flow(const std::vector<std::pair<Pixel, Pixel>>& pairs, const Mat3& rotation,
                          const CameraIntrinsics& k0, const CameraIntrinsics& k1);

/// RMS reprojection error of a fit over its segment (used by tests and the
/// PnP refiner).
double rms_reprojection(const RigidBodyFit& fit, const FieldD& z0, const FieldD& flow,
                        const FieldD& confidence, const LabelField& labels,
                        const CameraIntrinsics& k0, const CameraIntrinsics& k1);

}  // namespace rigidkit::rigidfit
