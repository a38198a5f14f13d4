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

#include "rigidkit/egomotion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <optional>

#include "rigidkit/parallel.hpp"
#include "rigidkit/rng.hpp"

namespace rigidkit::egomotion {
namespace {

struct NormalizedPairs {
  std::vector<Vec3> q0, q1;  // unit third component
};

NormalizedPairs normalize_pairs(const CorrespondenceSet& corr, const CameraIntrinsics& k0,
                                const CameraIntrinsics& k1) {
  NormalizedPairs np;
  np.q0.reserve(corr.size());
  np.q1.reserve(corr.size());
  const Mat3 k0i = k0.inverse_matrix();
  const Mat3 k1i = k1.inverse_matrix();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    Vec3 a = k0i * corr.p0[i].homogeneous();
    Vec3 b = k1i * corr.p1[i].homogeneous();
    np.q0.push_back(a / a.z());
    np.q1.push_back(b / b.z());
  }
  return np;
}

double sampson_distance(const Mat3& e, const Vec3& q0, const Vec3& q1) {
  return std::sqrt(sampson_squared(e, q0, q1, 1e-300));
}

std::vector<double> distances_for(const Mat3& e, const NormalizedPairs& np) {
  std::vector<double> d(np.q0.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = sampson_distance(e, np.q0[i], np.q1[i]);
  return d;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lower);
  }
  return m;
}

Mat3 project_to_essential(const Mat3& e) {
  const Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * Eigen::DiagonalMatrix<double, 3>(1.0, 1.0, 0.0) *
         svd.matrixV().transpose();
}

/// Least-squares essential fit on the selected pairs (normalized coords),
/// projected onto the essential manifold. Needs >= 8 pairs.
std::optional<Mat3> linear_essential_fit(const NormalizedPairs& np,
                                         const std::vector<bool>& use) {
  const std::size_t n =
      static_cast<std::size_t>(std::count(use.begin(), use.end(), true));
  if (n < 8) return std::nullopt;
  Eigen::MatrixXd design(n, 9);
  std::size_t r = 0;
  for (std::size_t i = 0; i < np.q0.size(); ++i) {
    if (!use[i]) continue;
    const Vec3& a = np.q0[i];
    const Vec3& b = np.q1[i];
    design.row(r++) << b.x() * a.x(), b.x() * a.y(), b.x(),
        b.y() * a.x(), b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto v = svd.matrixV().col(8);
  Mat3 e;
  e << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  return project_to_essential(e);
}

struct CheiralityVote {
  RigidTransform transform;
  std::size_t votes = 0;
  bool ok = false;
};

/// Votes for one (R, t) candidate in the frame-0-to-frame-1 convention used
/// by the textbook decomposition (P1 = R P0 + t).
std::size_t positive_depth_votes(const Mat3& r01, const Vec3& t01, const NormalizedPairs& np) {
  const Vec3 c1 = -r01.transpose() * t01;       // frame-1 center in frame-0 coords
  std::size_t votes = 0;
  for (std::size_t i = 0; i < np.q0.size(); ++i) {
    const Vec3 d1 = r01.transpose() * np.q1[i];  // frame-1 ray in frame-0 coords
    const RayIntersection hit = intersect_rays_midpoint(np.q0[i], c1, d1);
    if (hit.sin_angle < 1e-8) continue;
    if (hit.t0 > 0.0 && hit.t1 > 0.0) ++votes;
  }
  return votes;
}

RigidTransform decompose_normalized(const Mat3& e_in, const NormalizedPairs& np) {
  // Canonical sign so that E and -E take the identical code path.
  Mat3 e = e_in;
  {
    int bi = 0, bj = 0;
    double best = -1.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (std::abs(e(i, j)) > best) {
          best = std::abs(e(i, j));
          bi = i;
          bj = j;
        }
    if (e(bi, bj) < 0.0) e = -e;
  }

  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;

  const Mat3 ra = u * w * v.transpose();
  const Mat3 rb = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2);

  std::size_t best_votes = 0;
  int best_idx = -1;
  const std::array<std::pair<Mat3, Vec3>, 4> candidates = {
      std::pair{ra, t}, std::pair{ra, Vec3(-t)}, std::pair{rb, t}, std::pair{rb, Vec3(-t)}};
  for (int i = 0; i < 4; ++i) {
    const std::size_t votes = positive_depth_votes(candidates[i].first, candidates[i].second, np);
    if (votes > best_votes) {
      best_votes = votes;
      best_idx = i;
    }
  }
  if (best_idx < 0 || best_votes * 2 <= np.q0.size())
    throw CheiralityError("decompose_essential: no candidate wins the cheirality vote");

  // Convert from P1 = R P0 + t to the frame-1 -> frame-0 convention.
  const Mat3& r01 = candidates[best_idx].first;
  const Vec3& t01 = candidates[best_idx].second;
  Vec3 tc = -r01.transpose() * t01;
  tc /= tc.norm();
  return RigidTransform(Mat3(r01.transpose()), tc);
}

Vec2 transfer_residual(const Mat3& h, const Vec3& q) { return homography_transfer(h, q); }

double symmetric_transfer_distance(const Mat3& r, const Vec3& q0, const Vec3& q1) {
  const Vec2 f = transfer_residual(r, q1) - q0.head<2>();
  const Vec2 b = transfer_residual(r.transpose(), q0) - q1.head<2>();
  return std::sqrt(0.5 * (f.squaredNorm() + b.squaredNorm()));
}

Mat3 fit_rotation_normalized(const NormalizedPairs& np, const std::vector<bool>& use,
                             const Mat3& initial) {
  Mat3 r = initial;
  double lambda = 1e-6;

  const auto cost_of = [&](const Mat3& rot) {
    double c = 0.0;
    for (std::size_t i = 0; i < np.q0.size(); ++i) {
      if (!use[i]) continue;
      c += (transfer_residual(rot, np.q1[i]) - np.q0[i].head<2>()).squaredNorm();
      c += (transfer_residual(rot.transpose(), np.q0[i]) - np.q1[i].head<2>()).squaredNorm();
    }
    return c;
  };

  double cost = cost_of(r);
  for (int iter = 0; iter < 40; ++iter) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < np.q0.size(); ++i) {
      if (!use[i]) continue;
      // Forward transfer: residual = pi(R q1) - q0.
      {
        const Vec3 p = r * np.q1[i];
        Eigen::Matrix<double, 2, 3> dpi;
        dpi << 1.0 / p.z(), 0.0, -p.x() / (p.z() * p.z()),
            0.0, 1.0 / p.z(), -p.y() / (p.z() * p.z());
        const Eigen::Matrix<double, 2, 3> j = dpi * (-skew_matrix(p));
        const Vec2 res = Vec2(p.x() / p.z(), p.y() / p.z()) - np.q0[i].head<2>();
        jtj += j.transpose() * j;
        jtr += j.transpose() * res;
      }
      // Backward transfer: residual = pi(R' q0) - q1.
      {
        const Vec3 p = r.transpose() * np.q0[i];
        Eigen::Matrix<double, 2, 3> dpi;
        dpi << 1.0 / p.z(), 0.0, -p.x() / (p.z() * p.z()),
            0.0, 1.0 / p.z(), -p.y() / (p.z() * p.z());
        const Eigen::Matrix<double, 2, 3> j = dpi * (r.transpose() * skew_matrix(np.q0[i]));
        const Vec2 res = Vec2(p.x() / p.z(), p.y() / p.z()) - np.q1[i].head<2>();
        jtj += j.transpose() * j;
        jtr += j.transpose() * res;
      }
    }
    if (jtr.norm() < 1e-15) break;

    bool accepted = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const Eigen::Vector3d delta =
          (jtj + lambda * Eigen::Matrix3d::Identity()).ldlt().solve(-jtr);
      const Mat3 r_new =
          Eigen::AngleAxisd(delta.norm(), delta.norm() > 0 ? Vec3(delta.normalized())
                                                           : Vec3::UnitX())
              .toRotationMatrix() *
          r;
      const double new_cost = cost_of(r_new);
      if (new_cost < cost) {
        r = r_new;
        cost = new_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }
  // Clean up accumulated drift so the result satisfies rotation invariants.
  const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 rr = svd.matrixU() * svd.matrixV().transpose();
  if (rr.determinant() < 0.0) rr = -rr;
  return rr;
}

struct ScoredModel {
  Mat3 e;
  std::size_t inliers = 0;
  double msac = std::numeric_limits<double>::infinity();  // truncated quadratic
  long iteration = -1;
  int candidate = 0;
  bool valid = false;
};

// Hypotheses are ranked by the truncated-quadratic (MSAC) loss rather than
// the raw inlier count: with gross outliers and a permissive threshold, a
// slightly twisted model can beat the true one on count alone by catching
// extra outliers while keeping static residuals just under the threshold.
bool better_than(const ScoredModel& a, const ScoredModel& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.msac != b.msac) return a.msac < b.msac;
  if (a.inliers != b.inliers) return a.inliers > b.inliers;
  if (a.iteration != b.iteration) return a.iteration < b.iteration;
  return a.candidate < b.candidate;
}

/// Local refinement: shrink the selection threshold to the robust scale of
/// the CURRENT model's inliers, then re-fit on that tighter set. Anchoring
/// the shrink on pre-refit residuals keeps a contaminated least-squares step
/// from dragging the threshold along with it; a refit is only adopted when
/// it does not worsen the selected set.
Mat3 refine_on_inliers(Mat3 e, const NormalizedPairs& np, double user_threshold) {
  double threshold = user_threshold;
  for (int round = 0; round < 4; ++round) {
    const std::vector<double> d = distances_for(e, np);
    std::vector<double> inlier_d;
    for (double v : d)
      if (v < threshold) inlier_d.push_back(v);
    if (inlier_d.size() < 8) break;
    const double med = median_of(inlier_d);
    threshold = std::min(user_threshold, 2.5 * 1.4826 * med + 1e-12);

    std::vector<bool> use(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) use[i] = d[i] < threshold;
    const auto refit = linear_essential_fit(np, use);
    if (!refit) break;
    std::vector<double> post;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (use[i]) post.push_back(sampson_distance(*refit, np.q0[i], np.q1[i]));
    if (median_of(post) <= std::max(med, 1e-13)) e = *refit;
  }
  return e;
}

CorrespondenceSet subset(const CorrespondenceSet& corr, const std::vector<std::size_t>& idx) {
  CorrespondenceSet out;
  for (std::size_t i : idx) out.add(corr.p0[i], corr.p1[i], corr.weights.empty() ? 1.0 : corr.weights[i]);
  return out;
}

NormalizedPairs subset(const NormalizedPairs& np, const std::vector<bool>& use,
                       std::size_t cap) {
  NormalizedPairs out;
  for (std::size_t i = 0; i < np.q0.size() && out.q0.size() < cap; ++i) {
    if (!use[i]) continue;
    out.q0.push_back(np.q0[i]);
    out.q1.push_back(np.q1[i]);
  }
  return out;
}

}  // namespace

CorrespondenceSet sample_correspondences(const FieldD& flow, const FieldD& confidence,
                                         std::size_t max_n, std::uint64_t seed) {
  require_same_dims(flow, confidence, "sample_correspondences");
  if (flow.channels() != 2)
    throw std::invalid_argument("sample_correspondences: flow must have 2 channels");

  std::vector<std::pair<int, int>> usable;
  for (int i = 0; i < flow.height(); ++i)
    for (int j = 0; j < flow.width(); ++j) {
      if (!(confidence.at(i, j) > 0.5)) continue;
      const Vec2 f = flow.vec2(i, j);
      if (!std::isfinite(f.x()) || !std::isfinite(f.y())) continue;
      const Pixel p0 = pixel_center(i, j);
      if (!flow.in_bounds(p0.u + f.x(), p0.v + f.y())) continue;
      usable.emplace_back(i, j);
    }
  if (usable.size() < 5)
    throw InsufficientDataError("sample_correspondences: fewer than 5 confident pixels");

  std::vector<std::size_t> chosen;
  if (usable.size() <= max_n) {
    chosen.resize(usable.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else {
    Rng rng(seed);
    chosen = rng.sample_without_replacement(usable.size(), max_n);
    std::sort(chosen.begin(), chosen.end());
  }

  CorrespondenceSet corr;
  for (std::size_t k : chosen) {
    const auto& [i, j] = usable[k];
    const Pixel p0 = pixel_center(i, j);
    const Vec2 f = flow.vec2(i, j);
    corr.add(p0, Pixel{p0.u + f.x(), p0.v + f.y()}, confidence.at(i, j));
  }
  return corr;
}

std::vector<double> sampson_distances(const CorrespondenceSet& corr, const CameraIntrinsics& k0,
                                      const CameraIntrinsics& k1, const Mat3& essential) {
  return distances_for(essential, normalize_pairs(corr, k0, k1));
}

RigidTransform decompose_essential(const Mat3& e, const CorrespondenceSet& sample_corr,
                                   const CameraIntrinsics& k0, const CameraIntrinsics& k1) {
  const Eigen::JacobiSVD<Mat3> svd(e);
  const Vec3 s = svd.singularValues();
  if (!(s(0) > 0.0) || (s(0) - s(1)) / s(0) > 1e-3 || s(2) / s(0) > 1e-3)
    throw std::invalid_argument("decompose_essential: matrix lacks essential structure");
  if (sample_corr.size() == 0)
    throw std::invalid_argument("decompose_essential: no correspondences for the vote");
  return decompose_normalized(e, normalize_pairs(sample_corr, k0, k1));
}

bool detect_degenerate_translation(const CorrespondenceSet& corr, const CameraIntrinsics& k0,
                                   const CameraIntrinsics& k1, const Mat3& essential,
                                   const Mat3& rotation, double sampson_threshold,
                                   double ratio) {
  const NormalizedPairs np = normalize_pairs(corr, k0, k1);
  std::size_t e_count = 0, h_count = 0;
  for (std::size_t i = 0; i < np.q0.size(); ++i) {
    if (sampson_distance(essential, np.q0[i], np.q1[i]) < sampson_threshold) ++e_count;
    if (symmetric_transfer_distance(rotation, np.q0[i], np.q1[i]) < sampson_threshold) ++h_count;
  }
  return static_cast<double>(h_count) >= ratio * static_cast<double>(e_count);
}

Mat3 fit_rotation_homography(const CorrespondenceSet& corr, const std::vector<bool>& use,
                             const CameraIntrinsics& k0, const CameraIntrinsics& k1,
                             const Mat3& initial_rotation) {
  const NormalizedPairs np = normalize_pairs(corr, k0, k1);
  std::vector<bool> mask = use.empty() ? std::vector<bool>(corr.size(), true) : use;
  const Mat3 r = fit_rotation_normalized(np, mask, initial_rotation);
  return rotational_homography(k0, k1, r);
}

EgomotionEstimate estimate_egomotion_ransac(const CorrespondenceSet& corr,
                                            const CameraIntrinsics& k0,
                                            const CameraIntrinsics& k1,
                                            const RansacConfig& config, std::uint64_t seed) {
  const std::size_t n = corr.size();
  if (n < 5) throw InsufficientDataError("estimate_egomotion_ransac: need at least 5 pairs");
  const NormalizedPairs np = normalize_pairs(corr, k0, k1);

  ScoredModel best;
  constexpr long kChunk = 32;
  constexpr long kMinIterations = 64;  // floor before the adaptive exit
  long completed = 0;
  long needed = config.iterations;

  while (completed < std::min<long>(config.iterations, needed)) {
    const long chunk_end = std::min<long>(completed + kChunk, config.iterations);
    const long count = chunk_end - completed;
    std::vector<std::vector<ScoredModel>> chunk(static_cast<std::size_t>(count));

    parallel_for(static_cast<std::size_t>(count), config.threads, [&](std::size_t kk) {
      const long iter = completed + static_cast<long>(kk);
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(iter)));
      const auto pick = rng.sample_without_replacement(n, 5);
      std::vector<Mat3> cands;
      try {
        cands = five_point_essential(subset(corr, pick), k0, k1);
      } catch (const std::exception&) {
        return;
      }
      const double cap = config.sampson_threshold * config.sampson_threshold;
      for (std::size_t c = 0; c < cands.size(); ++c) {
        ScoredModel m;
        m.e = cands[c];
        m.inliers = 0;
        m.msac = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sampson_distance(m.e, np.q0[i], np.q1[i]);
          if (d < config.sampson_threshold) ++m.inliers;
          m.msac += std::min(d * d, cap);
        }
        m.iteration = iter;
        m.candidate = static_cast<int>(c);
        m.valid = true;
        chunk[kk].push_back(m);
      }
    });

    for (const auto& models : chunk)
      for (const auto& m : models)
        if (better_than(m, best)) best = m;
    completed = chunk_end;

    if (best.valid && best.inliers >= 5) {
      const double w = static_cast<double>(best.inliers) / static_cast<double>(n);
      const double p_fail = 1.0 - std::pow(w, 5);
      if (p_fail <= 0.0) {
        needed = kMinIterations;
      } else {
        needed = std::max(kMinIterations,
                          static_cast<long>(std::ceil(std::log(1.0 - config.confidence) /
                                                      std::log(p_fail))));
      }
    }
  }

  if (!best.valid) {
    // Minimal solves found nothing; fall back to a direct linear fit.
    const auto fallback = linear_essential_fit(np, std::vector<bool>(n, true));
    if (!fallback)
      throw EstimationFailure("egomotion: no essential model found", EgomotionEstimate{});
    best.e = *fallback;
    best.valid = true;
  }

  const Mat3 e = refine_on_inliers(best.e, np, config.sampson_threshold);
  const std::vector<double> dist = distances_for(e, np);
  EgomotionEstimate estimate;
  estimate.inlier_mask.resize(n);
  std::size_t e_inliers = 0;
  for (std::size_t i = 0; i < n; ++i) {
    estimate.inlier_mask[i] = dist[i] < config.sampson_threshold;
    if (estimate.inlier_mask[i]) ++e_inliers;
  }
  estimate.residual_median = median_of(dist);

  if (2 * e_inliers < n) {
    estimate.transform = RigidTransform::identity();
    throw EstimationFailure("egomotion: best model explains fewer than half the pairs",
                            estimate);
  }

  // Translation degeneracy: either a rotation-only homography explains the
  // matches about as well as the essential model, or the essential model has
  // no usable parallax at all (cheirality vote fails on its own inliers; the
  // inlier count of E is inflatable by movers under zero translation, so the
  // ratio test alone is not sufficient).
  Mat3 r_init = Mat3::Identity();
  std::optional<RigidTransform> decomposed;
  try {
    decomposed = decompose_normalized(e, subset(np, estimate.inlier_mask, 512));
    r_init = decomposed->R;
  } catch (const CheiralityError&) {
  }
  const Mat3 r_fit = fit_rotation_normalized(np, estimate.inlier_mask, r_init);

  std::size_t h_inliers = 0;
  std::vector<bool> h_mask(n);
  std::vector<double> h_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    h_dist[i] = symmetric_transfer_distance(r_fit, np.q0[i], np.q1[i]);
    h_mask[i] = h_dist[i] < config.sampson_threshold;
    if (h_mask[i]) ++h_inliers;
  }

  const bool ratio_degenerate =
      static_cast<double>(h_inliers) >= config.degeneracy_ratio * static_cast<double>(e_inliers);
  if (ratio_degenerate || (!decomposed && 2 * h_inliers >= n)) {
    estimate.degenerate = true;
    const Mat3 r_final = fit_rotation_normalized(np, h_mask, r_fit);
    estimate.transform = RigidTransform(r_final, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      h_dist[i] = symmetric_transfer_distance(r_final, np.q0[i], np.q1[i]);
      estimate.inlier_mask[i] = h_dist[i] < config.sampson_threshold;
    }
    estimate.residual_median = median_of(h_dist);
    return estimate;
  }

  if (!decomposed) {
    throw EstimationFailure("egomotion: cheirality vote failed on the inlier set", estimate);
  }
  estimate.transform = *decomposed;
  estimate.degenerate = false;
  return estimate;
}

EgomotionEstimate estimate_essential_lmeds(const CorrespondenceSet& corr,
                                           const CameraIntrinsics& k0,
                                           const CameraIntrinsics& k1, std::uint64_t seed) {
  const std::size_t n = corr.size();
  if (n < 5) throw InsufficientDataError("estimate_essential_lmeds: need at least 5 pairs");
  const NormalizedPairs np = normalize_pairs(corr, k0, k1);

  constexpr int kIterations = 256;
  Mat3 best_e = Mat3::Zero();
  double best_med = std::numeric_limits<double>::infinity();
  bool found = false;

  for (int iter = 0; iter < kIterations; ++iter) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(iter)));
    const auto pick = rng.sample_without_replacement(n, 5);
    std::vector<Mat3> cands;
    try {
      cands = five_point_essential(subset(corr, pick), k0, k1);
    } catch (const std::exception&) {
      continue;
    }
    for (const Mat3& e : cands) {
      std::vector<double> sq(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sampson_distance(e, np.q0[i], np.q1[i]);
        sq[i] = d * d;
      }
      const double med = median_of(sq);
      if (med < best_med) {
        best_med = med;
        best_e = e;
        found = true;
      }
    }
  }
  if (!found)
    throw EstimationFailure("lmeds: no essential model found", EgomotionEstimate{});

  Mat3 e = best_e;
  if (n > 5) {
    // Robust scale from the minimizing median, then local refinement.
    const double sigma = 1.4826 * (1.0 + 5.0 / (static_cast<double>(n) - 5.0)) *
                         std::sqrt(std::max(best_med, 0.0));
    e = refine_on_inliers(e, np, std::max(2.5 * sigma, 1e-12));
  }

  const std::vector<double> dist = distances_for(e, np);
  EgomotionEstimate estimate;
  estimate.residual_median = median_of(dist);
  const double inlier_threshold =
      std::max(2.5 * 1.4826 * estimate.residual_median, 1e-9);
  estimate.inlier_mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) estimate.inlier_mask[i] = dist[i] < inlier_threshold;

  estimate.transform = decompose_normalized(e, subset(np, estimate.inlier_mask, 512));
  estimate.degenerate = false;
  return estimate;
}

}  // namespace rigidkit::egomotion
