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

#include "rigidkit/egomotion.hpp"
#include "rigidkit/field.hpp"
#include "rigidkit/geometry.hpp"

namespace rigidkit::costmaps {

// Dense per-pixel rigidity evidence. Four complementary costs cover the
// motion configurations where the previous one goes blind:
//   epipolar (general) -> homography (no camera translation)
//   -> 3D parallax direction (motion inside the epipolar plane)
//   -> depth contrast (motion collinear with the camera translation).
// Invalid pixels carry NaN and are treated as "no evidence" downstream.

struct MotionContext {
  CameraIntrinsics K0, K1;
  egomotion::EgomotionEstimate ego;
  Mat3 H_R;             // K0 * R * K1^-1
  double gamma = invalid_value<double>();  // depth-prior scale, set later

  MotionContext(const CameraIntrinsics& k0, const CameraIntrinsics& k1,
                egomotion::EgomotionEstimate estimate)
      : K0(k0), K1(k1), ego(std::move(estimate)),
        H_R(rotational_homography(k0, k1, ego.transform.R)) {}
};

/// Rotation-compensated, depth-normalized 3D flow per pixel:
///   T_sf = K0^-1 * (tau * H_R * p1~  -  p0~),
/// which equals (R * P1 - P0) / Z0 when tau = Z1/Z0. Pixels with
/// nonpositive expansion or non-finite flow are marked invalid.
FieldD rectified_scene_flow(const FieldD& flow, const FieldD& expansion,
                            const MotionContext& ctx, int threads = 1);

/// Per-pixel Sampson error in pixel coordinates with the stabilizing
/// epsilon folded into the denominator. Refuses degenerate egomotion.
FieldD cost_epipolar(const FieldD& flow, const MotionContext& ctx, int threads = 1);

/// Symmetric transfer error of the rotational homography, px^2.
FieldD cost_homography(const FieldD& flow, const MotionContext& ctx, int threads = 1);

/// ||T_sf|| * |sin(angle(T_sf, -Tc))| with the angle capped at pi/2.
FieldD cost_pp3d(const FieldD& scene_flow, const MotionContext& ctx, int threads = 1);

/// Depth from per-pixel flow triangulation under the egomotion model
/// (unit baseline). Zero-parallax and behind-camera pixels are invalid.
FieldD triangulate_rigid_depth(const FieldD& flow, const MotionContext& ctx, int threads = 1);

/// Global scale aligning the depth prior to triangulated depth: robust
/// (Huber, delta = 0.1 in log-depth) fit of log Z_flow - log(gamma Z_prior).
/// Needs at least 100 jointly valid pixels.
double align_depth_scale(const FieldD& z_flow, const FieldD& z_prior, const FieldD& validity);

/// |log(Z_flow / (gamma * Z_prior))| per pixel.
FieldD cost_depth_contrast(const FieldD& z_flow, const FieldD& z_prior, double gamma,
                           int threads = 1);

/// Marks pixels with confidence <= 0.5 invalid in a cost/scene-flow field.
void mask_low_confidence(FieldD& field, const FieldD& confidence);

}  // namespace rigidkit::costmaps
