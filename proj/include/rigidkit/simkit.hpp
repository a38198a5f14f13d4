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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rigidkit/field.hpp"
#include "rigidkit/geometry.hpp"

namespace rigidkit::simkit {

// Two-frame scene generator. Surfaces are analytic, and every ground-truth
// sample is produced by intersecting the exact pixel-center viewing ray with
// the scene, so rendered flow/expansion/depth satisfy the rigid-motion
// equations to machine precision. That property is what makes the renderer
// usable as a verification oracle.

/// Parallelogram patch: X(a,b) = origin + a*e1 + b*e2 with (a,b) in [0,1]^2.
struct PlanarPatch {
  Vec3 origin, e1, e2;
};

/// Oriented box; faces are rendered as six planar patches.
struct BoxBody {
  Vec3 center;
  Vec3 half_extent;
  Mat3 orient = Mat3::Identity();
};

struct SphereBody {
  Vec3 center;
  double radius;
};

/// Patch displaced along its normal by amp*sin(2*pi*ca*a)*sin(2*pi*cb*b).
struct HeightFieldPatch {
  Vec3 origin, e1, e2;
  double amplitude = 0.0;
  double cycles_a = 1.0;
  double cycles_b = 1.0;
};

using Primitive = std::variant<PlanarPatch, BoxBody, SphereBody, HeightFieldPatch>;

/// A scene element. id 0 pieces form the rigid background; movers carry
/// unique ids > 0 and a world-frame motion applied between the two frames.
struct Body {
  int id = 0;
  Primitive geometry;
  RigidTransform motion = RigidTransform::identity();
};

enum class PriorDepthModel { exact, scaled, smooth_ramp, noisy };

struct NoiseConfig {
  double flow_sigma = 0.0;       // px, i.i.d. Gaussian per component
  double expansion_sigma = 0.0;  // applied in log-expansion
  PriorDepthModel prior_model = PriorDepthModel::exact;
  double prior_scale = 1.0;                       // scaled
  double prior_ramp_lo = 0.8, prior_ramp_hi = 1.2;  // smooth_ramp, across columns
  double prior_sigma_log = 0.0;                   // noisy
  double outlier_fraction = 0.0;                  // in [0, 0.5]
  std::uint64_t seed = 0;
};

struct SceneDescription {
  int width = 0, height = 0;
  CameraIntrinsics K0{1, 1, 0, 0}, K1{1, 1, 0, 0};
  /// Camera egomotion: x0 = R * x1 + T (frame-1 coords into frame-0 coords).
  RigidTransform camera_motion;
  std::vector<Body> bodies;  // background pieces (id 0) and movers (id > 0)
  NoiseConfig noise;
};

struct BodyTruth {
  int id = 0;
  RigidTransform world_motion;      // as authored, world frame
  RigidTransform frame0_to_frame1;  // P1 = R * P0 + T, camera coords
  double translation_scale = 0.0;   // metric norm of the relative translation
};

struct GroundTruth {
  FieldD flow;        // 2ch px
  FieldD expansion;   // tau = Z1/Z0
  FieldD z0, z1;      // scene units
  FieldD confidence;  // 0.9 at valid pixels, 0 at empty/occluded
  FieldD occlusion;   // 1 where the frame-1 projection is occluded
  LabelField labels;  // 0 background, 1..N movers, kInvalidLabel empty
  RigidTransform ego;
  std::vector<BodyTruth> bodies;  // entry per mover plus the id-0 background
};

/// Flow/expansion/prior/confidence as the estimation pipeline would see them.
struct CorruptedInputs {
  FieldD flow, expansion, z_prior, confidence;
};

/// Renders exact per-pixel ground truth for a scene. Throws
/// std::invalid_argument for scenes violating the visibility preconditions.
GroundTruth render(const SceneDescription& scene);

enum class ScenarioKind { general, coplanar, collinear, zero_translation, pure_rotation };

ScenarioKind scenario_from_name(const std::string& name);
std::string scenario_name(ScenarioKind kind);

/// Canonical 320x240 scene for each motion configuration. The seed jitters
/// motions and placement without changing the configuration class.
SceneDescription make_degenerate_scenario(ScenarioKind kind, std::uint64_t seed);

/// Applies the noise model to rendered ground truth. Deterministic per seed;
/// a zero config returns bit-identical copies of the inputs.
CorruptedInputs corrupt(const GroundTruth& gt, const NoiseConfig& noise);

}  // namespace rigidkit::simkit
