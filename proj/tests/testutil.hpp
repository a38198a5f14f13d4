// Shared fixtures and independent oracles for the test suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rigidkit/egomotion.hpp"
#include "rigidkit/field.hpp"
#include "rigidkit/geometry.hpp"
#include "rigidkit/rng.hpp"
#include "rigidkit/simkit.hpp"

namespace testutil {

using namespace rigidkit;

inline double deg(double radians) { return rad2deg(radians); }

/// Rotation error between two rotations, degrees.
inline double rot_err_deg(const Mat3& a, const Mat3& b) {
  return rad2deg(rotation_angle_between(a, b));
}

/// Angle between translation directions ignoring overall sign, degrees.
inline double dir_err_deg(const Vec3& a, const Vec3& b) {
  return rad2deg(direction_angle_upto_sign(a, b));
}

/// Correspondences from ground-truth flow at every pixel of a label set
/// (ignoring the confidence gate; optionally restricted to one label).
inline egomotion::CorrespondenceSet
corr_from_gt(const simkit::GroundTruth& gt, int label = -1, int stride = 1) {
  egomotion::CorrespondenceSet corr;
  for (int i = 0; i < gt.flow.height(); i += stride)
    for (int j = 0; j < gt.flow.width(); j += stride) {
      if (gt.labels.at(i, j) == kInvalidLabel) continue;
      if (label >= 0 && gt.labels.at(i, j) != label) continue;
      if (!(gt.confidence.at(i, j) > 0.5)) continue;
      const Pixel p0 = pixel_center(i, j);
      corr.add(p0, Pixel{p0.u + gt.flow.at(i, j, 0), p0.v + gt.flow.at(i, j, 1)});
    }
  return corr;
}

/// Deterministic subsample of a correspondence set.
inline egomotion::CorrespondenceSet subsample(const egomotion::CorrespondenceSet& corr,
                                              std::size_t n, std::uint64_t seed) {
  if (corr.size() <= n) return corr;
  Rng rng(seed);
  auto idx = rng.sample_without_replacement(corr.size(), n);
  std::sort(idx.begin(), idx.end());
  egomotion::CorrespondenceSet out;
  for (std::size_t k : idx) out.add(corr.p0[k], corr.p1[k], corr.weights[k]);
  return out;
}

/// Replaces a fraction of matches with uniform garbage flow (+-20 px).
inline void inject_outliers(egomotion::CorrespondenceSet& corr, double fraction,
                            std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n_out = static_cast<std::size_t>(fraction * corr.size());
  for (std::size_t k : rng.sample_without_replacement(corr.size(), n_out)) {
    corr.p1[k].u = corr.p0[k].u + rng.uniform(-20.0, 20.0);
    corr.p1[k].v = corr.p0[k].v + rng.uniform(-20.0, 20.0);
  }
}

/// IoU of two binary masks.
inline double mask_iou(const LabelField& a, const LabelField& b) {
  long inter = 0, uni = 0;
  for (int i = 0; i < a.height(); ++i)
    for (int j = 0; j < a.width(); ++j) {
      const bool in_a = a.at(i, j) != 0;
      const bool in_b = b.at(i, j) != 0;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni > 0 ? static_cast<double>(inter) / uni : 1.0;
}

/// Random convex mask: rasterized convex hull of a point cloud
/// (half-plane test against every hull edge).
inline LabelField random_convex_mask(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  const double cx = rng.uniform(width * 0.35, width * 0.65);
  const double cy = rng.uniform(height * 0.35, height * 0.65);
  const double rmax = rng.uniform(0.18, 0.42) * std::min(width, height);
  std::vector<Vec2> pts;
  const int n = 8 + static_cast<int>(rng.uniform_index(10));
  for (int k = 0; k < n; ++k) {
    const double a = rng.uniform(0.0, 2.0 * kPi);
    const double r = rng.uniform(0.45 * rmax, rmax);
    pts.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a));
  }
  // Monotone-chain convex hull.
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  const auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
    hull[k++] = *it;
  }
  hull.resize(k - 1);

  LabelField mask(width, height, FieldKind::label, 0);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const Vec2 p(j + 0.5, i + 0.5);
      bool inside = true;
      for (std::size_t e = 0; e < hull.size() && inside; ++e)
        inside = cross(hull[e], hull[(e + 1) % hull.size()], p) >= 0;
      if (inside) mask.at(i, j) = 1;
    }
  return mask;
}

}  // namespace testutil
