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

#include <vector>

#include "rigidkit/field.hpp"

namespace rigidkit::evalkit {

struct InstanceMatch {
  int pred_id = 0;
  int gt_id = 0;
  double iou = 0.0;
};

struct SegScores {
  double bg_iou = 0.0;
  double obj_fmeasure = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<InstanceMatch> matches;  // greedy matches at IoU >= 0.5
};

/// KITTI-style outlier percentages (error > 3 px AND > 5% of ground truth).
struct FlowScores {
  double d1 = 0.0, d2 = 0.0, fl = 0.0, sf = 0.0;
  double d1_fg = 0.0, d2_fg = 0.0, fl_fg = 0.0, sf_fg = 0.0;  // gt label > 0
  long valid_pixels = 0;
  long fg_pixels = 0;
};

/// Background IoU plus greedy IoU >= 0.5 instance matching (F-measure).
/// Pixels invalid in the ground truth are excluded; invalid predictions at
/// valid pixels count against the prediction.
SegScores score_segmentation(const LabelField& pred_labels, const LabelField& gt_labels);

/// Disparity/flow/scene-flow outlier rates over gt-valid pixels. Depths are
/// converted to disparity as disparity_scale / Z (disparity_scale plays
/// baseline*fx; default 1.0 for synthetic scenes). `gt_labels` is optional
/// and only feeds the foreground split.
FlowScores score_flow(const FieldD& pred_flow, const FieldD& gt_flow, const FieldD& pred_z0,
                      const FieldD& pred_z1, const FieldD& gt_z0, const FieldD& gt_z1,
                      const FieldD& validity, double disparity_scale = 1.0,
                      const LabelField* gt_labels = nullptr);

/// Multiplies pred by median(gt)/median(pred) over valid pixels. Throws
/// std::domain_error when the prediction median is zero.
FieldD median_scale_align(const FieldD& pred_z, const FieldD& gt_z, const FieldD& validity);

}  // namespace rigidkit::evalkit
