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
#include <vector>

#include "rigidkit/errors.hpp"
#include "rigidkit/field.hpp"
#include "rigidkit/geometry.hpp"

namespace rigidkit::egomotion {

/// Sparse two-frame matches in pixel coordinates.
struct CorrespondenceSet {
  std::vector<Pixel> p0, p1;
  std::vector<double> weights;  // optional per-pair confidence in [0,1]

  std::size_t size() const { return p0.size(); }
  void add(const Pixel& a, const Pixel& b, double w = 1.0) {
    p0.push_back(a);
    p1.push_back(b);
    weights.push_back(w);
  }
};

/// Camera egomotion fit. transform maps frame-1 camera coordinates into
/// frame-0 coordinates (x0 = R x1 + T) with ||T|| = 1, except in the
/// degenerate branch where T = 0 and R comes from a rotation-only homography.
struct EgomotionEstimate {
  RigidTransform transform;
  std::vector<bool> inlier_mask;
  double residual_median = 0.0;  // Sampson distance, normalized coordinates
  bool degenerate = false;
};

struct EstimationFailure : std::runtime_error {
  EstimationFailure(const std::string& msg, EgomotionEstimate best)
      : std::runtime_error(msg), best_attempt(std::move(best)) {}
  EgomotionEstimate best_attempt;
};

struct RansacConfig {
  int iterations = 1000;
  /// Inlier threshold on the first-order (Sampson) epipolar distance,
  /// in normalized (K^-1) image coordinates.
  double sampson_threshold = 0.01;
  double confidence = 0.999;  // adaptive early exit
  double degeneracy_ratio = 0.95;
  int threads = 1;
};

/// Uniform draw of matches at confident pixels (confidence > 0.5). The
/// match target p1 = p0 + flow(p0) must land inside the image. Deterministic
/// for a fixed seed. Throws InsufficientDataError below 5 usable pixels.
CorrespondenceSet sample_correspondences(const FieldD& flow, const FieldD& confidence,
                                         std::size_t max_n, std::uint64_t seed);

/// Candidate essential matrices fitting five matches exactly, each scaled to
/// singular values (1, 1, 0). Degenerate inputs yield an empty list.
std::vector<Mat3> five_point_essential(const CorrespondenceSet& corr,
                                       const CameraIntrinsics& k0, const CameraIntrinsics& k1);

/// Robust egomotion: five-point hypotheses inside RANSAC, local refinement
/// on inliers, cheirality decomposition, and a rotation-homography test that
/// flags translation-degenerate motion. Throws EstimationFailure (carrying
/// the best attempt) when no model reaches 50% inliers.
EgomotionEstimate estimate_egomotion_ransac(const CorrespondenceSet& corr,
                                            const CameraIntrinsics& k0,
                                            const CameraIntrinsics& k1,
                                            const RansacConfig& config, std::uint64_t seed);

/// Least-median-of-squares essential fit; tolerates close to 50% outliers.
EgomotionEstimate estimate_essential_lmeds(const CorrespondenceSet& corr,
                                           const CameraIntrinsics& k0,
                                           const CameraIntrinsics& k1, std::uint64_t seed);

/// Picks the one feasible (R, T) among the four essential decompositions by
/// counting matches that triangulate in front of both cameras. Invariant to
/// the sign of E. Throws CheiralityError when no candidate wins > 50% votes.
RigidTransform decompose_essential(const Mat3& e, const CorrespondenceSet& sample_corr,
                                   const CameraIntrinsics& k0, const CameraIntrinsics& k1);

/// Model-selection test: true when a rotation-only homography explains at
/// least `ratio` times as many matches as the essential model at the same
/// threshold. `rotation` is the homography expressed in normalized
/// coordinates, i.e. the rotation matrix itself.
bool detect_degenerate_translation(const CorrespondenceSet& corr, const CameraIntrinsics& k0,
                                   const CameraIntrinsics& k1, const Mat3& essential,
                                   const Mat3& rotation, double sampson_threshold,
                                   double ratio = 0.95);

/// Rotation-only homography fit K0*R*K1^-1 by Levenberg-Marquardt on
/// symmetric transfer residuals over the given matches.
Mat3 fit_rotation_homography(const CorrespondenceSet& corr, const std::vector<bool>& use,
                             const CameraIntrinsics& k0, const CameraIntrinsics& k1,
                             const Mat3& initial_rotation);

/// Sampson distances (normalized coordinates) of every pair under E.
std::vector<double> sampson_distances(const CorrespondenceSet& corr, const CameraIntrinsics& k0,
                                      const CameraIntrinsics& k1, const Mat3& essential);

}  // namespace rigidkit::egomotion
