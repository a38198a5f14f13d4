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

#include "rigidkit/costmaps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rigidkit/parallel.hpp"

namespace rigidkit::costmaps {
namespace {

constexpr double kSampsonEps = 1e-9;

void require_non_degenerate(const MotionContext& ctx, const char* op) {
  if (ctx.ego.degenerate)
    throw std::logic_error(std::string(op) +
                           ": undefined under degenerate egomotion; use the homography cost");
}

bool finite_flow(const FieldD& flow, int i, int j) {
  return std::isfinite(flow.at(i, j, 0)) && std::isfinite(flow.at(i, j, 1));
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

}  // namespace

FieldD rectified_scene_flow(const FieldD& flow, const FieldD& expansion,
                            const MotionContext& ctx, int threads) {
  require_same_dims(flow, expansion, "rectified_scene_flow");
  FieldD out(flow.width(), flow.height(), FieldKind::scene_flow, invalid_value<double>());
  const Mat3 k0i = ctx.K0.inverse_matrix();
  const Mat3 h = ctx.H_R;
  parallel_for(static_cast<std::size_t>(flow.height()), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < flow.width(); ++j) {
      const double tau = expansion.at(i, j);
      if (!(tau > 0.0) || !finite_flow(flow, i, j)) continue;
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1h(p0.u + flow.at(i, j, 0), p0.v + flow.at(i, j, 1), 1.0);
      // tau scales the un-normalized warped point; with tau = Z1/Z0 this is
      // exactly (R*P1 - P0)/Z0, so static pixels give -Tc/Z0 and a purely
      // rotating camera gives zero.
      out.set_vec3(i, j, k0i * (tau * (h * p1h) - p0.homogeneous()));
    }
  });
  return out;
}

FieldD cost_epipolar(const FieldD& flow, const MotionContext& ctx, int threads) {
  require_non_degenerate(ctx, "cost_epipolar");
  const Mat3 e = essential_from_motion(ctx.ego.transform);
  const Mat3 f = fundamental_from_essential(e, ctx.K0, ctx.K1);
  FieldD out(flow.width(), flow.height(), FieldKind::cost, invalid_value<double>());
  parallel_for(static_cast<std::size_t>(flow.height()), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < flow.width(); ++j) {
      if (!finite_flow(flow, i, j)) continue;
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1h(p0.u + flow.at(i, j, 0), p0.v + flow.at(i, j, 1), 1.0);
      out.at(i, j) = sampson_squared(f, p0.homogeneous(), p1h, kSampsonEps);
    }
  });
  return out;
}

FieldD cost_homography(const FieldD& flow, const MotionContext& ctx, int threads) {
  // H^-1 built analytically (K1 R' K0^-1) so the swapped-frame map matches
  // this one exactly.
  const Mat3 h = ctx.H_R;
  const Mat3 h_inv = ctx.K1.matrix() * ctx.ego.transform.R.transpose() * ctx.K0.inverse_matrix();
  FieldD out(flow.width(), flow.height(), FieldKind::cost, invalid_value<double>());
  parallel_for(static_cast<std::size_t>(flow.height()), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < flow.width(); ++j) {
      if (!finite_flow(flow, i, j)) continue;
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p0h = p0.homogeneous();
      const Vec3 p1h(p0.u + flow.at(i, j, 0), p0.v + flow.at(i, j, 1), 1.0);
      const Vec2 fwd = homography_transfer(h, p1h) - p0h.head<2>();
      const Vec2 bwd = homography_transfer(h_inv, p0h) - p1h.head<2>();
      out.at(i, j) = fwd.squaredNorm() + bwd.squaredNorm();
    }
  });
  return out;
}

FieldD cost_pp3d(const FieldD& scene_flow, const MotionContext& ctx, int threads) {
  require_non_degenerate(ctx, "cost_pp3d");
  if (scene_flow.channels() != 3)
    throw std::invalid_argument("cost_pp3d: expects a 3-channel scene-flow field");
  const Vec3 neg_tc = -ctx.ego.transform.T_vec.normalized();
  FieldD out(scene_flow.width(), scene_flow.height(), FieldKind::cost, invalid_value<double>());
  parallel_for(static_cast<std::size_t>(scene_flow.height()), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < scene_flow.width(); ++j) {
      const Vec3 t = scene_flow.vec3(i, j);
      if (!t.allFinite()) continue;
      const double norm = t.norm();
      if (norm < 1e-12) {
        out.at(i, j) = 0.0;
        continue;
      }
      const double beta = std::atan2(t.cross(neg_tc).norm(), t.dot(neg_tc));
      out.at(i, j) = norm * std::sin(std::min(beta, kPi / 2.0));
    }
  });
  return out;
}

FieldD triangulate_rigid_depth(const FieldD& flow, const MotionContext& ctx, int threads) {
  require_non_degenerate(ctx, "triangulate_rigid_depth");
  const Mat3 k0i = ctx.K0.inverse_matrix();
  const Mat3 k1i = ctx.K1.inverse_matrix();
  const RigidTransform& ego = ctx.ego.transform;
  FieldD out(flow.width(), flow.height(), FieldKind::depth, invalid_value<double>());
  parallel_for(static_cast<std::size_t>(flow.height()), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < flow.width(); ++j) {
      if (!finite_flow(flow, i, j)) continue;
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1h(p0.u + flow.at(i, j, 0), p0.v + flow.at(i, j, 1), 1.0);
      Vec3 d0 = k0i * p0.homogeneous();
      d0 /= d0.z();
      const Vec3 d1 = ego.R * (k1i * p1h);  // frame-1 ray in frame-0 coords
      const RayIntersection hit = intersect_rays_midpoint(d0, ego.T_vec, d1);
      if (hit.sin_angle < 1e-8 || hit.t0 <= 0.0 || hit.t1 <= 0.0) continue;
      const double z = hit.point.z();
      if (z > 0.0 && std::isfinite(z)) out.at(i, j) = z;
    }
  });
  return out;
}

double align_depth_scale(const FieldD& z_flow, const FieldD& z_prior, const FieldD& validity) {
  require_same_dims(z_flow, z_prior, "align_depth_scale");
  require_same_dims(z_flow, validity, "align_depth_scale");
  std::vector<double> log_ratio;
  for (int i = 0; i < z_flow.height(); ++i)
    for (int j = 0; j < z_flow.width(); ++j) {
      if (!(validity.at(i, j) > 0.5)) continue;
      const double zf = z_flow.at(i, j), zp = z_prior.at(i, j);
      if (!(zf > 0.0) || !(zp > 0.0) || !std::isfinite(zf) || !std::isfinite(zp)) continue;
      log_ratio.push_back(std::log(zf) - std::log(zp));
    }
  if (log_ratio.size() < 100)
    throw InsufficientDataError("align_depth_scale: fewer than 100 jointly valid pixels");

  // Huber location estimate in log space (delta = 0.1), from the median.
  // Plain Huber keeps a bounded but nonzero influence for gross outliers,
  // which leaves a percent-level bias at 20% contamination; points beyond
  // 3x the robust scale are therefore rejected outright between passes.
  std::vector<double> sorted = log_ratio;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double g = sorted[sorted.size() / 2];
  constexpr double kDelta = 0.1;
  std::vector<char> keep(log_ratio.size(), 1);
  for (int outer = 0; outer < 3; ++outer) {
    for (int iter = 0; iter < 100; ++iter) {
      double wsum = 0.0, acc = 0.0;
      for (std::size_t i = 0; i < log_ratio.size(); ++i) {
        if (!keep[i]) continue;
        const double w = huber_weight(log_ratio[i] - g, kDelta);
        wsum += w;
        acc += w * log_ratio[i];
      }
      const double g_new = acc / wsum;
      const double step = std::abs(g_new - g);
      g = g_new;
      if (step < 1e-14) break;
    }
    std::vector<double> abs_dev;
    for (std::size_t i = 0; i < log_ratio.size(); ++i)
      if (keep[i]) abs_dev.push_back(std::abs(log_ratio[i] - g));
    std::nth_element(abs_dev.begin(), abs_dev.begin() + abs_dev.size() / 2, abs_dev.end());
    const double cutoff = 3.0 * std::max(kDelta, 1.4826 * abs_dev[abs_dev.size() / 2]);
    bool changed = false;
    for (std::size_t i = 0; i < log_ratio.size(); ++i) {
      const char k = std::abs(log_ratio[i] - g) <= cutoff ? 1 : 0;
      changed |= k != keep[i];
      keep[i] = k;
    }
    if (!changed) break;
  }
  return std::exp(g);
}

FieldD cost_depth_contrast(const FieldD& z_flow, const FieldD& z_prior, double gamma,
                           int threads) {
  require_same_dims(z_flow, z_prior, "cost_depth_contrast");
  if (!(gamma > 0.0)) throw std::invalid_argument("cost_depth_contrast: gamma must be positive");
  FieldD out(z_flow.width(), z_flow.height(), FieldKind::cost, invalid_value<double>());
  parallel_for(static_cast<std::size_t>(z_flow.height()), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < z_flow.width(); ++j) {
      const double zf = z_flow.at(i, j), zp = z_prior.at(i, j);
      if (!(zf > 0.0) || !(zp > 0.0) || !std::isfinite(zf) || !std::isfinite(zp)) continue;
      out.at(i, j) = std::abs(std::log(zf / (gamma * zp)));
    }
  });
  return out;
}

void mask_low_confidence(FieldD& field, const FieldD& confidence) {
  require_same_dims(field, confidence, "mask_low_confidence");
  for (int i = 0; i < field.height(); ++i)
    for (int j = 0; j < field.width(); ++j)
      if (!(confidence.at(i, j) > 0.5))
        for (int c = 0; c < field.channels(); ++c)
          field.at(i, j, c) = invalid_value<double>();
}

}  // namespace rigidkit::costmaps
