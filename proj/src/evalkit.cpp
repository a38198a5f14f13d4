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

#include "rigidkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "rigidkit/errors.hpp"

namespace rigidkit::evalkit {
namespace {

constexpr double kOutlierAbs = 3.0;   // px
constexpr double kOutlierRel = 0.05;  // of the ground-truth magnitude

bool outlier(double err, double gt_magnitude) {
  return err > kOutlierAbs && err > kOutlierRel * std::abs(gt_magnitude);
}

double median_positive(const FieldD& z, const FieldD& validity) {
  std::vector<double> v;
  for (int i = 0; i < z.height(); ++i)
    for (int j = 0; j < z.width(); ++j)
      if (validity.at(i, j) > 0.5 && std::isfinite(z.at(i, j))) v.push_back(z.at(i, j));
  if (v.empty()) throw InsufficientDataError("median_scale_align: no valid pixels");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

}  // namespace

SegScores score_segmentation(const LabelField& pred_labels, const LabelField& gt_labels) {
  if (!pred_labels.same_dims(gt_labels))
    throw std::invalid_argument("score_segmentation: dimension mismatch");

  long bg_inter = 0, bg_union = 0;
  std::map<int, long> pred_area, gt_area;
  std::map<std::pair<int, int>, long> overlap;

  for (int i = 0; i < gt_labels.height(); ++i)
    for (int j = 0; j < gt_labels.width(); ++j) {
      const int gt = gt_labels.at(i, j);
      if (gt == kInvalidLabel) continue;
      const int pred = pred_labels.at(i, j);
      const bool gt_bg = gt == 0;
      const bool pred_bg = pred == 0;  // invalid predictions count as wrong
      if (gt_bg && pred_bg) ++bg_inter;
      if (gt_bg || pred_bg) ++bg_union;
      if (gt > 0) ++gt_area[gt];
      if (pred > 0 && pred != kInvalidLabel) ++pred_area[pred];
      if (gt > 0 && pred > 0 && pred != kInvalidLabel) ++overlap[{pred, gt}];
    }

  SegScores scores;
  scores.bg_iou = bg_union > 0 ? static_cast<double>(bg_inter) / bg_union : 1.0;

  struct Pair {
    int pred, gt;
    double iou;
  };
  std::vector<Pair> pairs;
  for (const auto& [key, inter] : overlap) {
    const auto [pred, gt] = key;
    const double uni = static_cast<double>(pred_area[pred] + gt_area[gt] - inter);
    pairs.push_back({pred, gt, uni > 0 ? inter / uni : 0.0});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });

  std::map<int, bool> pred_used, gt_used;
  for (const Pair& p : pairs) {
    if (p.iou < 0.5 || pred_used[p.pred] || gt_used[p.gt]) continue;
    pred_used[p.pred] = gt_used[p.gt] = true;
    scores.matches.push_back({p.pred, p.gt, p.iou});
  }

  const std::size_t n_pred = pred_area.size(), n_gt = gt_area.size();
  const std::size_t n_match = scores.matches.size();
  if (n_pred == 0 && n_gt == 0) {
    scores.precision = scores.recall = scores.obj_fmeasure = 1.0;
  } else {
    scores.precision = n_pred > 0 ? static_cast<double>(n_match) / n_pred : 0.0;
    scores.recall = n_gt > 0 ? static_cast<double>(n_match) / n_gt : 0.0;
    const double pr = scores.precision + scores.recall;
    scores.obj_fmeasure = pr > 0 ? 2.0 * scores.precision * scores.recall / pr : 0.0;
  }
  return scores;
}

FlowScores score_flow(const FieldD& pred_flow, const FieldD& gt_flow, const FieldD& pred_z0,
                      const FieldD& pred_z1, const FieldD& gt_z0, const FieldD& gt_z1,
                      const FieldD& validity, double disparity_scale,
                      const LabelField* gt_labels) {
  for (const FieldD* f : {&gt_flow, &pred_z0, &pred_z1, &gt_z0, &gt_z1, &validity})
    if (!pred_flow.same_dims(*f)) throw std::invalid_argument("score_flow: dimension mismatch");

  const auto disparity = [&](double z) { return disparity_scale / z; };

  long n = 0, nd1 = 0, nd2 = 0, nfl = 0, nsf = 0;
  long n_fg = 0, nd1_fg = 0, nd2_fg = 0, nfl_fg = 0, nsf_fg = 0;
  for (int i = 0; i < pred_flow.height(); ++i)
    for (int j = 0; j < pred_flow.width(); ++j) {
      if (!(validity.at(i, j) > 0.5)) continue;
      const double gz0 = gt_z0.at(i, j), gz1 = gt_z1.at(i, j);
      const Vec2 gf = gt_flow.vec2(i, j);
      if (!(gz0 > 0.0) || !(gz1 > 0.0) || !gf.allFinite()) continue;
      ++n;

      const double pz0 = pred_z0.at(i, j), pz1 = pred_z1.at(i, j);
      const Vec2 pf = pred_flow.vec2(i, j);
      // A missing prediction is an outlier in every affected metric.
      const bool d1_bad = !(pz0 > 0.0) || !std::isfinite(pz0) ||
                          outlier(std::abs(disparity(pz0) - disparity(gz0)), disparity(gz0));
      const bool d2_bad = !(pz1 > 0.0) || !std::isfinite(pz1) ||
                          outlier(std::abs(disparity(pz1) - disparity(gz1)), disparity(gz1));
      const bool fl_bad = !pf.allFinite() || outlier((pf - gf).norm(), gf.norm());
      const bool sf_bad = d1_bad || d2_bad || fl_bad;
      nd1 += d1_bad;
      nd2 += d2_bad;
      nfl += fl_bad;
      nsf += sf_bad;
      if (gt_labels && gt_labels->at(i, j) > 0 && gt_labels->at(i, j) != kInvalidLabel) {
        ++n_fg;
        nd1_fg += d1_bad;
        nd2_fg += d2_bad;
        nfl_fg += fl_bad;
        nsf_fg += sf_bad;
      }
    }
  if (n == 0) throw InsufficientDataError("score_flow: no valid pixels");

  FlowScores s;
  s.valid_pixels = n;
  s.fg_pixels = n_fg;
  s.d1 = 100.0 * nd1 / n;
  s.d2 = 100.0 * nd2 / n;
  s.fl = 100.0 * nfl / n;
  s.sf = 100.0 * nsf / n;
  if (n_fg > 0) {
    s.d1_fg = 100.0 * nd1_fg / n_fg;
    s.d2_fg = 100.0 * nd2_fg / n_fg;
    s.fl_fg = 100.0 * nfl_fg / n_fg;
    s.sf_fg = 100.0 * nsf_fg / n_fg;
  }
  return s;
}

FieldD median_scale_align(const FieldD& pred_z, const FieldD& gt_z, const FieldD& validity) {
  if (!pred_z.same_dims(gt_z) || !pred_z.same_dims(validity))
    throw std::invalid_argument("median_scale_align: dimension mismatch");
  const double med_pred = median_positive(pred_z, validity);
  const double med_gt = median_positive(gt_z, validity);
  if (med_pred == 0.0) throw std::domain_error("median_scale_align: prediction median is zero");
  const double factor = med_gt / med_pred;
  FieldD out = pred_z;
  for (double& v : out.data()) v *= factor;
  return out;
}

}  // namespace rigidkit::evalkit
