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

#include "rigidkit/rigidfit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "rigidkit/egomotion.hpp"
#include "rigidkit/errors.hpp"
#include "rigidkit/parallel.hpp"
#include "rigidkit/rng.hpp"

namespace rigidkit::rigidfit {
namespace {

constexpr int kMinValidPixels = 50;
constexpr std::size_t kMaxFitCorrespondences = 2000;
constexpr int kScaleHypotheses = 200;
constexpr double kScaleInlierBand = 0.10;
constexpr double kScaleMinInlierFraction = 0.30;

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

struct RaySetup {
  Vec3 d0;  // frame-0 ray, unit z
  Vec3 c1;  // frame-1 center in frame-0 coords
  Vec3 d1;  // frame-1 ray rotated into frame-0 coords
};

RaySetup make_rays(const Pixel& p0, const Pixel& p1, const RigidTransform& rt,
                   const Mat3& k0i, const Mat3& k1i) {
  Vec3 d0 = k0i * p0.homogeneous();
  d0 /= d0.z();
  return {d0, rt.T_vec, rt.R * (k1i * p1.homogeneous())};
}

Point3 triangulate_midpoint(const RaySetup& rays) {
  const RayIntersection hit = intersect_rays_midpoint(rays.d0, rays.c1, rays.d1);
  if (hit.sin_angle < 1e-8)
    throw ZeroParallaxError("triangulate: rays are parallel");
  if (hit.t0 <= 0.0 || hit.t1 <= 0.0)
    throw BehindCameraError("triangulate: negative depth");
  return Point3::from(hit.point);
}

Point3 triangulate_dlt(const Pixel& p0, const Pixel& p1, const RigidTransform& rt,
                       const CameraIntrinsics& k0, const CameraIntrinsics& k1,
                       const RaySetup& rays) {
  const RayIntersection hit = intersect_rays_midpoint(rays.d0, rays.c1, rays.d1);
  if (hit.sin_angle < 1e-8)
    throw ZeroParallaxError("triangulate: rays are parallel");

  // Projection matrices: x0 = K0 [I | 0] X, x1 = K1 [R' | -R'T] X.
  Mat34 pm0 = Mat34::Zero();
  pm0.block<3, 3>(0, 0) = k0.matrix();
  Mat34 pm1;
  pm1.block<3, 3>(0, 0) = rt.R.transpose();
  pm1.col(3) = -rt.R.transpose() * rt.T_vec;
  pm1 = k1.matrix() * pm1;

  Eigen::Matrix4d design;
  design.row(0) = p0.u * pm0.row(2) - pm0.row(0);
  design.row(1) = p0.v * pm0.row(2) - pm0.row(1);
  design.row(2) = p1.u * pm1.row(2) - pm1.row(0);
  design.row(3) = p1.v * pm1.row(2) - pm1.row(1);

  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(design, Eigen::ComputeFullV);
  const Eigen::Vector4d xh = svd.matrixV().col(3);
  if (std::abs(xh(3)) < 1e-15 * xh.norm())
    throw ZeroParallaxError("triangulate: point at infinity");
  const Vec3 x = xh.head<3>() / xh(3);
  const double z1 = (rt.R.transpose() * (x - rt.T_vec)).z();
  if (x.z() <= 0.0 || z1 <= 0.0) throw BehindCameraError("triangulate: negative depth");
  return Point3::from(x);
}

struct SegmentPixels {
  std::vector<std::pair<int, int>> all;    // every pixel of the segment
  std::vector<std::pair<int, int>> valid;  // confident, finite flow
};

SegmentPixels collect_segment(const LabelField& labels, const FieldD& flow,
                              const FieldD& confidence, int seg_id) {
  SegmentPixels px;
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) {
      if (labels.at(i, j) != seg_id) continue;
      px.all.emplace_back(i, j);
      if (!(confidence.at(i, j) > 0.5)) continue;
      if (!std::isfinite(flow.at(i, j, 0)) || !std::isfinite(flow.at(i, j, 1))) continue;
      px.valid.emplace_back(i, j);
    }
  return px;
}

std::pair<Pixel, Pixel> pixel_pair(const FieldD& flow, int i, int j) {
  const Pixel p0 = pixel_center(i, j);
  return {p0, Pixel{p0.u + flow.at(i, j, 0), p0.v + flow.at(i, j, 1)}};
}

}  // namespace

std::string to_string(FitStatus status) {
  switch (status) {
    case FitStatus::ok: return "ok";
    case FitStatus::too_few_valid: return "too_few_valid";
    case FitStatus::estimation_failed: return "estimation_failed";
    case FitStatus::cheirality_failed: return "cheirality_failed";
    case FitStatus::scale_rejected: return "scale_rejected";
  }
  return "unknown";
}

Point3 triangulate(const Pixel& p0, const Pixel& p1, const RigidTransform& rt,
                   const CameraIntrinsics& k0, const CameraIntrinsics& k1,
                   TriangulationMethod method) {
  if (rt.T_vec.norm() <= 0.0)
    throw std::invalid_argument("triangulate: motion has no baseline");
  const RaySetup rays = make_rays(p0, p1, rt, k0.inverse_matrix(), k1.inverse_matrix());
  if (method == TriangulationMethod::midpoint) {
    const Point3 x = triangulate_midpoint(rays);
    // Frame-1 depth check mirrors the DLT branch.
    if ((rt.R.transpose() * (x.vec() - rt.T_vec)).z() <= 0.0)
      throw BehindCameraError("triangulate: negative depth");
    return x;
  }
  return triangulate_dlt(p0, p1, rt, k0, k1, rays);
}

double mean_parallax_flow(const std::vector<std::pair<Pixel, Pixel>>& pairs, const Mat3& rotation,
                          const CameraIntrinsics& k0, const CameraIntrinsics& k1) {
  if (pairs.empty()) return 0.0;
  const Mat3 h = rotational_homography(k0, k1, rotation);
  double acc = 0.0;
  for (const auto& [p0, p1] : pairs) {
    const Vec2 warped = homography_transfer(h, p1.homogeneous());
    acc += (warped - Vec2(p0.u, p0.v)).norm();
  }
  return acc / static_cast<double>(pairs.size());
}

bool gate_update(const RigidBodyFit& fit, double parallax_min) {
  return fit.mean_parallax >= parallax_min && fit.valid_fraction >= 0.3;
}

RigidBodyFit fit_segment(const LabelField& labels, const FieldD& flow, const FieldD& confidence,
                         const FieldD& z_prior, int seg_id, const CameraIntrinsics& k0,
                         const CameraIntrinsics& k1, std::uint64_t seed) {
  require_same_dims(flow, confidence, "fit_segment");
  require_same_dims(flow, z_prior, "fit_segment");

  RigidBodyFit fit;
  fit.id = seg_id;

  const SegmentPixels px = collect_segment(labels, flow, confidence, seg_id);
  fit.valid_fraction =
      px.all.empty() ? 0.0
                     : static_cast<double>(px.valid.size()) / static_cast<double>(px.all.size());
  if (px.valid.size() < kMinValidPixels) {
    fit.status = FitStatus::too_few_valid;
    return fit;
  }

  // Essential fit on (a deterministic subsample of) the valid correspondences.
  egomotion::CorrespondenceSet corr;
  if (px.valid.size() <= kMaxFitCorrespondences) {
    for (const auto& [i, j] : px.valid) {
      const auto [p0, p1] = pixel_pair(flow, i, j);
      corr.add(p0, p1, confidence.at(i, j));
    }
  } else {
    Rng rng(mix_seed(seed, 0x5e9));
    auto chosen = rng.sample_without_replacement(px.valid.size(), kMaxFitCorrespondences);
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t k : chosen) {
      const auto& [i, j] = px.valid[k];
      const auto [p0, p1] = pixel_pair(flow, i, j);
      corr.add(p0, p1, confidence.at(i, j));
    }
  }

  egomotion::EgomotionEstimate essential;
  try {
    essential = egomotion::estimate_essential_lmeds(corr, k0, k1, seed);
  } catch (const CheiralityError&) {
    fit.status = FitStatus::cheirality_failed;
    return fit;
  } catch (const egomotion::EstimationFailure&) {
    fit.status = FitStatus::estimation_failed;
    return fit;
  }
  fit.n_inliers = static_cast<std::size_t>(
      std::count(essential.inlier_mask.begin(), essential.inlier_mask.end(), true));

  // Parallax after removing the fitted rotation, over all valid pixels.
  {
    std::vector<std::pair<Pixel, Pixel>> pairs;
    pairs.reserve(px.valid.size());
    for (const auto& [i, j] : px.valid) pairs.push_back(pixel_pair(flow, i, j));
    fit.mean_parallax = mean_parallax_flow(pairs, essential.transform.R, k0, k1);
  }

  // Triangulate under the unit-baseline motion and align to the prior by a
  // ratio RANSAC (hypotheses from single pixels, refined by inlier median).
  const Mat3 k0i = k0.inverse_matrix();
  const Mat3 k1i = k1.inverse_matrix();
  std::vector<double> ratios;
  ratios.reserve(px.valid.size());
  for (const auto& [i, j] : px.valid) {
    const double zp = z_prior.at(i, j);
    if (!(zp > 0.0) || !std::isfinite(zp)) continue;
    const auto [p0, p1] = pixel_pair(flow, i, j);
    const RaySetup rays = make_rays(p0, p1, essential.transform, k0i, k1i);
    const RayIntersection hit = intersect_rays_midpoint(rays.d0, rays.c1, rays.d1);
    if (hit.sin_angle < 1e-8 || hit.t0 <= 0.0 || hit.t1 <= 0.0) continue;
    const double zt = hit.point.z();
    if (zt > 0.0 && std::isfinite(zt)) ratios.push_back(zp / zt);
  }
  if (ratios.size() < kMinValidPixels) {
    fit.status = FitStatus::scale_rejected;
    return fit;
  }

  Rng scale_rng(mix_seed(seed, 0x5ca1e));
  std::size_t best_count = 0;
  double best_hypothesis = 0.0;
  for (int h = 0; h < kScaleHypotheses; ++h) {
    const double s = ratios[scale_rng.uniform_index(ratios.size())];
    if (!(s > 0.0)) continue;
    std::size_t count = 0;
    for (double r : ratios)
      if (std::abs(r / s - 1.0) <= kScaleInlierBand) ++count;
    if (count > best_count) {
      best_count = count;
      best_hypothesis = s;
    }
  }
  if (static_cast<double>(best_count) <
      kScaleMinInlierFraction * static_cast<double>(ratios.size())) {
    fit.status = FitStatus::scale_rejected;
    return fit;
  }
  std::vector<double> inlier_ratios;
  for (double r : ratios)
    if (std::abs(r / best_hypothesis - 1.0) <= kScaleInlierBand) inlier_ratios.push_back(r);
  fit.scale = median_of(inlier_ratios);

  // Express as the frame-0 -> frame-1 motion with metric translation.
  const Mat3 r01 = essential.transform.R.transpose();
  const Vec3 t01 = -fit.scale * (r01 * essential.transform.T_vec);
  fit.transform = RigidTransform(r01, t01);
  fit.status = FitStatus::ok;
  fit.updated = gate_update(fit);
  return fit;
}

double rms_reprojection(const RigidBodyFit& fit, const FieldD& z0, const FieldD& flow,
                        const FieldD& confidence, const LabelField& labels,
                        const CameraIntrinsics& k0, const CameraIntrinsics& k1) {
  double acc = 0.0;
  long n = 0;
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) {
      if (labels.at(i, j) != fit.id || !(confidence.at(i, j) > 0.5)) continue;
      const double z = z0.at(i, j);
      if (!(z > 0.0) || !std::isfinite(z)) continue;
      if (!std::isfinite(flow.at(i, j, 0)) || !std::isfinite(flow.at(i, j, 1))) continue;
      const auto [p0, p1] = pixel_pair(flow, i, j);
      const Vec3 pt = fit.transform.apply(backproject(p0, z, k0).vec());
      if (pt.z() <= 0.0) continue;
      const Pixel proj = project(pt, k1);
      acc += Vec2(proj.u - p1.u, proj.v - p1.v).squaredNorm();
      ++n;
    }
  // Component-wise RMS (two residual components per point).
  return n > 0 ? std::sqrt(acc / static_cast<double>(2 * n)) : 0.0;
}

RigidBodyFit refine_pnp_lm(const RigidBodyFit& fit, const FieldD& z0_trusted, const FieldD& flow,
                           const FieldD& confidence, const LabelField& labels,
                           const CameraIntrinsics& k0, const CameraIntrinsics& k1) {
  if (!fit.updated) return fit;

  // Collect (P0, p1) observations for the segment.
  std::vector<Vec3> points;
  std::vector<Vec2> targets;
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) {
      if (labels.at(i, j) != fit.id || !(confidence.at(i, j) > 0.5)) continue;
      const double z = z0_trusted.at(i, j);
      if (!(z > 0.0) || !std::isfinite(z)) continue;
      if (!std::isfinite(flow.at(i, j, 0)) || !std::isfinite(flow.at(i, j, 1))) continue;
      const auto [p0, p1] = pixel_pair(flow, i, j);
      points.push_back(backproject(p0, z, k0).vec());
      targets.emplace_back(p1.u, p1.v);
    }
  if (points.size() < 6) return fit;

  const Mat3 kmat = k1.matrix();
  const auto cost_of = [&](const Mat3& r, const Vec3& t) {
    double c = 0.0;
    for (std::size_t n = 0; n < points.size(); ++n) {
      const Vec3 p = r * points[n] + t;
      if (p.z() <= 1e-12) return std::numeric_limits<double>::infinity();
      const Vec3 h = kmat * p;
      c += (Vec2(h.x() / h.z(), h.y() / h.z()) - targets[n]).squaredNorm();
    }
    return c;
  };

  Mat3 r = fit.transform.R;
  Vec3 t = fit.transform.T_vec;
  double cost = cost_of(r, t);
  const double initial_cost = cost;
  double lambda = 1e-4;
  int consecutive_rejections = 0;
  bool diverged = false;

  for (int iter = 0; iter < 100; ++iter) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t n = 0; n < points.size(); ++n) {
      const Vec3 rp = r * points[n];
      const Vec3 p = rp + t;
      const Vec3 h = kmat * p;
      const Vec2 res(h.x() / h.z() - targets[n].x(), h.y() / h.z() - targets[n].y());
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << 1.0 / h.z(), 0.0, -h.x() / (h.z() * h.z()),
          0.0, 1.0 / h.z(), -h.y() / (h.z() * h.z());
      const Eigen::Matrix<double, 2, 3> dproj = dpi * kmat;
      Eigen::Matrix<double, 2, 6> jac;
      jac.block<2, 3>(0, 0) = dproj * (-skew_matrix(rp));  // left rotation update
      jac.block<2, 3>(0, 3) = dproj;
      jtj += jac.transpose() * jac;
      jtr += jac.transpose() * res;
    }
    if (jtr.norm() < 1e-14 * (1.0 + cost)) break;

    bool accepted = false;
    while (consecutive_rejections < 10) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-jtr);
      const Vec3 omega = delta.head<3>();
      const Mat3 r_new =
          (omega.norm() > 0
               ? Eigen::AngleAxisd(omega.norm(), Vec3(omega.normalized())).toRotationMatrix()
               : Mat3::Identity()) *
          r;
      const Vec3 t_new = t + delta.tail<3>();
      const double new_cost = cost_of(r_new, t_new);
      if (new_cost < cost) {
        r = r_new;
        t = t_new;
        cost = new_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        consecutive_rejections = 0;
        accepted = true;
        break;
      }
      lambda *= 10.0;
      ++consecutive_rejections;
    }
    if (!accepted) {
      diverged = consecutive_rejections >= 10 && cost > initial_cost;
      break;
    }
    if (cost < 1e-24) break;
  }

  // Monotone acceptance: never return something worse than the input.
  if (cost > initial_cost) {
    RigidBodyFit unchanged = fit;
    unchanged.pnp_diverged = true;
    return unchanged;
  }

  RigidBodyFit refined = fit;
  // Orthonormality drifts over many increments; snap back.
  const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 rr = svd.matrixU() * svd.matrixV().transpose();
  if (rr.determinant() < 0.0) rr = -rr;
  refined.transform = RigidTransform(rr, t);
  refined.scale = t.norm();
  refined.pnp_diverged = diverged;
  return refined;
}

SceneFlowOutput assemble_scene_flow(const LabelField& labels,
                                    const std::map<int, RigidBodyFit>& fits,
                                    const FieldD& z_prior, const FieldD& flow,
                                    const FieldD& expansion, const CameraIntrinsics& k0,
                                    const CameraIntrinsics& k1, int threads) {
  require_same_dims(flow, z_prior, "assemble_scene_flow");
  require_same_dims(flow, expansion, "assemble_scene_flow");
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) {
      const int lab = labels.at(i, j);
      if (lab != kInvalidLabel && fits.find(lab) == fits.end())
        throw std::invalid_argument("assemble_scene_flow: missing fit for label " +
                                    std::to_string(lab));
    }

  const int w = flow.width(), h = flow.height();
  SceneFlowOutput out{FieldD(w, h, FieldKind::depth, invalid_value<double>()),
                      FieldD(w, h, FieldKind::depth, invalid_value<double>()),
                      flow,  // refined in place below
                      FieldD(w, h, FieldKind::points, invalid_value<double>())};
  const Mat3 k0i = k0.inverse_matrix();
  const Mat3 k1i = k1.inverse_matrix();

  parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < w; ++j) {
      const Pixel p0 = pixel_center(i, j);

      const auto pass_through = [&] {
        const double zp = z_prior.at(i, j);
        const double tau = expansion.at(i, j);
        out.z0.at(i, j) = zp;
        if (zp > 0.0 && tau > 0.0 && std::isfinite(zp) && std::isfinite(tau)) {
          const double z1 = zp * tau;
          out.z1.at(i, j) = z1;
          if (std::isfinite(flow.at(i, j, 0)) && std::isfinite(flow.at(i, j, 1))) {
            const Pixel p1{p0.u + flow.at(i, j, 0), p0.v + flow.at(i, j, 1)};
            out.p1.set_vec3(i, j, z1 * (k1i * p1.homogeneous()));
          }
        }
      };

      const int lab = labels.at(i, j);
      if (lab == kInvalidLabel) {
        pass_through();
        continue;
      }
      const RigidBodyFit& fit = fits.at(lab);
      if (!fit.updated || !std::isfinite(flow.at(i, j, 0)) || !std::isfinite(flow.at(i, j, 1))) {
        pass_through();
        continue;
      }

      // Triangulate with the metric motion; baseline length carries the
      // prior-aligned scale, so the depth needs no extra factor.
      const RigidTransform inv = fit.transform.inverse();
      const Pixel p1{p0.u + flow.at(i, j, 0), p0.v + flow.at(i, j, 1)};
      const RaySetup rays = make_rays(p0, p1, inv, k0i, k1i);
      const RayIntersection hit = intersect_rays_midpoint(rays.d0, rays.c1, rays.d1);
      if (hit.sin_angle < 1e-8 || hit.t0 <= 0.0 || hit.t1 <= 0.0 || !(hit.point.z() > 0.0)) {
        pass_through();
        continue;
      }
      const Vec3 point0 = backproject(p0, hit.point.z(), k0).vec();
      const Vec3 point1 = fit.transform.apply(point0);
      if (!(point1.z() > 0.0)) {
        pass_through();
        continue;
      }
      out.z0.at(i, j) = point0.z();
      out.z1.at(i, j) = point1.z();
      out.p1.set_vec3(i, j, point1);
      const Pixel reproj = project(point1, k1);
      out.flow_refined.set_vec2(i, j, Vec2(reproj.u - p0.u, reproj.v - p0.v));
    }
  });
  return out;
}

}  // namespace rigidkit::rigidfit
