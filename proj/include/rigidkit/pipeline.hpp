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

#include <filesystem>
#include <map>
#include <optional>

#include "rigidkit/costmaps.hpp"
#include "rigidkit/egomotion.hpp"
#include "rigidkit/evalkit.hpp"
#include "rigidkit/rigidfit.hpp"
#include "rigidkit/segment.hpp"
#include "rigidkit/simkit.hpp"

namespace rigidkit::pipeline {

struct PipelineConfig {
  std::filesystem::path flow_path, expansion_path, depth_path, confidence_path, intrinsics_path;
  std::filesystem::path labels_path;         // sceneflow input
  std::filesystem::path trusted_depth_path;  // optional, enables PnP refinement
  std::filesystem::path outdir;

  segment::ThresholdConfig thresholds;
  egomotion::RansacConfig ransac;
  std::size_t max_correspondences = 2000;
  double parallax_min = 4.0;
  double disparity_scale = 1.0;
  bool refine_pnp = false;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Applies a JSON config document on top of the defaults.
void apply_config_json(PipelineConfig& cfg, const std::filesystem::path& config_path);

struct SegmentInputs {
  FieldD flow, expansion, z_prior, confidence;
  CameraIntrinsics K0{1, 1, 0, 0}, K1{1, 1, 0, 0};
};

SegmentInputs load_segment_inputs(const PipelineConfig& cfg);
SegmentInputs inputs_from_sim(const simkit::CorruptedInputs& sim, const CameraIntrinsics& k0,
                              const CameraIntrinsics& k1);

struct SegmentOutputs {
  egomotion::EgomotionEstimate ego;
  std::optional<FieldD> cost_epi, cost_hom, cost_pp3d, cost_depth;
  std::optional<FieldD> scene_flow;
  double gamma = invalid_value<double>();
  LabelField labels;
  segment::SegmentationResult segmentation;
};

/// Egomotion -> cost maps -> threshold fusion -> connected components.
/// Under degenerate egomotion only the homography cost is produced and used.
SegmentOutputs run_segment(const SegmentInputs& in, const PipelineConfig& cfg);

void write_segment_outputs(const SegmentOutputs& out, const std::filesystem::path& dir);

struct SceneFlowOutputs {
  std::map<int, rigidfit::RigidBodyFit> fits;
  rigidfit::SceneFlowOutput fields;
};

/// Per-segment rigid fits plus the assembled refined depth/flow.
SceneFlowOutputs run_sceneflow(const SegmentInputs& in, const LabelField& labels,
                               const PipelineConfig& cfg,
                               const FieldD* trusted_z0 = nullptr);

void write_sceneflow_outputs(const SceneFlowOutputs& out, const std::filesystem::path& dir);

struct EvaluationRow {
  evalkit::SegScores seg;
  evalkit::FlowScores flow;
};

EvaluationRow run_evaluate(const std::filesystem::path& pred_dir,
                           const std::filesystem::path& gt_dir, double disparity_scale);

void write_evaluation(const EvaluationRow& row, const std::filesystem::path& dir);

/// Renders a scene, applies its noise model, and writes the eight data files
/// plus manifest.json (which also carries intrinsics, the ego transform and
/// per-body motions).
void run_simulate(const simkit::SceneDescription& scene, const std::filesystem::path& outdir);

}  // namespace rigidkit::pipeline
