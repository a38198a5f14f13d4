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

#include "rigidkit/simkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "rigidkit/parallel.hpp"
#include "rigidkit/rng.hpp"

namespace rigidkit::simkit {
namespace {

constexpr double kMinRayT = 1e-6;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  bool valid = false;
};

// Ray origin is the camera center (0,0,0); directions are scaled so that
// dir.z == 1, making the ray parameter equal to camera depth.
Hit intersect_patch(const Vec3& o, const Vec3& d, const PlanarPatch& p) {
  const Vec3 n = p.e1.cross(p.e2);
  const double nn = n.squaredNorm();
  if (nn <= 0.0) return {};
  const double denom = d.dot(n);
  const Vec3 rel = o - p.origin;
  const double scale = d.norm() * n.norm();
  if (std::abs(denom) > 1e-12 * scale) {
    const double t = -rel.dot(n) / denom;
    if (t <= kMinRayT) return {};
    const Vec3 q = rel + t * d;
    const double a = q.cross(p.e2).dot(n) / nn;
    const double b = p.e1.cross(q).dot(n) / nn;
    if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) return {};
    return {t, true};
  }
  // Ray parallel to the patch plane. If it lies in the plane, the visible
  // point is the entry into the patch region (edge-on surfaces are what the
  // coplanar scenarios are made of).
  if (std::abs(rel.dot(n)) > 1e-9 * (1.0 + rel.norm()) * n.norm()) return {};
  const double ca = d.cross(p.e2).dot(n) / nn;
  const double cb = p.e1.cross(d).dot(n) / nn;
  const double a0 = rel.cross(p.e2).dot(n) / nn;
  const double b0 = p.e1.cross(rel).dot(n) / nn;
  double lo = kMinRayT, hi = std::numeric_limits<double>::infinity();
  for (const auto& [c, x0] : {std::pair{ca, a0}, std::pair{cb, b0}}) {
    if (std::abs(c) < 1e-15) {
      if (x0 < -1e-12 || x0 > 1.0 + 1e-12) return {};
      continue;
    }
    double t1 = (0.0 - x0) / c;
    double t2 = (1.0 - x0) / c;
    if (t1 > t2) std::swap(t1, t2);
    lo = std::max(lo, t1);
    hi = std::min(hi, t2);
  }
  if (lo > hi) return {};
  return {lo, true};
}

Hit intersect_sphere(const Vec3& o, const Vec3& d, const SphereBody& s) {
  const Vec3 oc = o - s.center;
  const double a = d.squaredNorm();
  const double b = 2.0 * d.dot(oc);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return {};
  const double sq = std::sqrt(disc);
  const double t1 = (-b - sq) / (2.0 * a);
  const double t2 = (-b + sq) / (2.0 * a);
  if (t1 > kMinRayT) return {t1, true};
  if (t2 > kMinRayT) return {t2, true};
  return {};
}

Hit intersect_heightfield(const Vec3& o, const Vec3& d, const HeightFieldPatch& hf) {
  const Vec3 n = hf.e1.cross(hf.e2);
  const double nn = n.squaredNorm();
  if (nn <= 0.0) return {};
  const Vec3 nhat = n.normalized();
  const double denom = d.dot(n);
  if (std::abs(denom) < 1e-12 * d.norm() * n.norm()) return {};
  const Vec3 rel = o - hf.origin;

  const auto surface_gap = [&](double t) {
    const Vec3 q = rel + t * d;
    const double a = q.cross(hf.e2).dot(n) / nn;
    const double b = hf.e1.cross(q).dot(n) / nn;
    const double s = q.dot(nhat);
    const double h = hf.amplitude * std::sin(2.0 * kPi * hf.cycles_a * a) *
                     std::sin(2.0 * kPi * hf.cycles_b * b);
    return s - h;
  };
  const auto inside = [&](double t) {
    const Vec3 q = rel + t * d;
    const double a = q.cross(hf.e2).dot(n) / nn;
    const double b = hf.e1.cross(q).dot(n) / nn;
    return a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0;
  };

  // March a bracket around the base-plane crossing, then bisect. The surface
  // stays within +-amplitude of the base plane, which bounds the parameter
  // window where a crossing can occur.
  const double t_plane = -rel.dot(n) / denom;
  const double span = (2.0 * std::abs(hf.amplitude) + 1e-6) * n.norm() / std::abs(denom);
  const double t_lo = std::max(kMinRayT, t_plane - span);
  const double t_hi = t_plane + span;
  const int steps = 256;
  double prev_t = t_lo, prev_g = surface_gap(t_lo);
  for (int i = 1; i <= steps; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / steps;
    const double g = surface_gap(t);
    if (prev_g == 0.0 || (prev_g < 0.0) != (g < 0.0)) {
      double a = prev_t, b = t;
      double ga = prev_g;
      for (int k = 0; k < 80; ++k) {
        const double m = 0.5 * (a + b);
        const double gm = surface_gap(m);
        if ((gm < 0.0) == (ga < 0.0)) {
          a = m;
          ga = gm;
        } else {
          b = m;
        }
      }
      const double t_hit = 0.5 * (a + b);
      if (t_hit > kMinRayT && inside(t_hit)) return {t_hit, true};
    }
    prev_t = t;
    prev_g = g;
  }
  return {};
}

Hit intersect_box(const Vec3& o, const Vec3& d, const BoxBody& box) {
  Hit best;
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign = -1; sign <= 1; sign += 2) {
      const Vec3 u = box.orient.col((axis + 1) % 3) * box.half_extent((axis + 1) % 3);
      const Vec3 v = box.orient.col((axis + 2) % 3) * box.half_extent((axis + 2) % 3);
      const Vec3 face_center = box.center + sign * box.orient.col(axis) * box.half_extent(axis);
      PlanarPatch face{face_center - u - v, 2.0 * u, 2.0 * v};
      const Hit h = intersect_patch(o, d, face);
      if (h.valid && h.t < best.t) best = h;
    }
  }
  return best;
}

Hit intersect(const Vec3& o, const Vec3& d, const Primitive& prim) {
  return std::visit(
      [&](const auto& g) -> Hit {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlanarPatch>) return intersect_patch(o, d, g);
        if constexpr (std::is_same_v<G, BoxBody>) return intersect_box(o, d, g);
        if constexpr (std::is_same_v<G, SphereBody>) return intersect_sphere(o, d, g);
        if constexpr (std::is_same_v<G, HeightFieldPatch>) return intersect_heightfield(o, d, g);
        return {};
      },
      prim);
}

Primitive transform_primitive(const Primitive& prim, const RigidTransform& m) {
  return std::visit(
      [&](const auto& g) -> Primitive {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlanarPatch>)
          return PlanarPatch{m.apply(g.origin), m.R * g.e1, m.R * g.e2};
        else if constexpr (std::is_same_v<G, BoxBody>)
          return BoxBody{m.apply(g.center), g.half_extent, m.R * g.orient};
        else if constexpr (std::is_same_v<G, SphereBody>)
          return SphereBody{m.apply(g.center), g.radius};
        else
          return HeightFieldPatch{m.apply(g.origin), m.R * g.e1, m.R * g.e2,
                                  g.amplitude, g.cycles_a, g.cycles_b};
      },
      prim);
}

std::vector<Vec3> sample_surface(const Primitive& prim) {
  std::vector<Vec3> pts;
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PlanarPatch> || std::is_same_v<G, HeightFieldPatch>) {
          for (int i = 0; i <= 4; ++i)
            for (int j = 0; j <= 4; ++j)
              pts.push_back(g.origin + g.e1 * (i / 4.0) + g.e2 * (j / 4.0));
        } else if constexpr (std::is_same_v<G, BoxBody>) {
          for (int sx = -1; sx <= 1; sx += 2)
            for (int sy = -1; sy <= 1; sy += 2)
              for (int sz = -1; sz <= 1; sz += 2)
                pts.push_back(g.center + g.orient * Vec3(sx * g.half_extent.x(),
                                                         sy * g.half_extent.y(),
                                                         sz * g.half_extent.z()));
        } else {
          for (int a = 0; a < 3; ++a)
            for (int s = -1; s <= 1; s += 2) {
              Vec3 p = g.center;
              p(a) += s * g.radius;
              pts.push_back(p);
            }
        }
      },
      prim);
  return pts;
}

void validate_scene(const SceneDescription& scene) {
  if (scene.width <= 0 || scene.height <= 0)
    throw std::invalid_argument("scene: dimensions must be positive");
  if (scene.noise.outlier_fraction < 0.0 || scene.noise.outlier_fraction > 0.5)
    throw std::invalid_argument("scene: outlier_fraction outside [0, 0.5]");
  std::vector<int> seen;
  const RigidTransform to_frame1 = scene.camera_motion.inverse();
  for (const auto& body : scene.bodies) {
    if (body.id < 0) throw std::invalid_argument("scene: negative body id");
    if (body.id > 0) {
      if (std::find(seen.begin(), seen.end(), body.id) != seen.end())
        throw std::invalid_argument("scene: duplicate body id");
      seen.push_back(body.id);
    }
    for (const Vec3& p : sample_surface(body.geometry)) {
      if (p.z() <= 0.0)
        throw std::invalid_argument("scene: body surface not in front of frame-0 camera");
      if (to_frame1.apply(body.motion.apply(p)).z() <= 0.0)
        throw std::invalid_argument("scene: body surface not in front of frame-1 camera");
    }
  }
}

}  // namespace

GroundTruth render(const SceneDescription& scene) {
  validate_scene(scene);
  const int w = scene.width, h = scene.height;
  GroundTruth gt{
      FieldD(w, h, FieldKind::flow, invalid_value<double>()),
      FieldD(w, h, FieldKind::expansion, invalid_value<double>()),
      FieldD(w, h, FieldKind::depth, invalid_value<double>()),
      FieldD(w, h, FieldKind::depth, invalid_value<double>()),
      FieldD(w, h, FieldKind::confidence, 0.0),
      FieldD(w, h, FieldKind::confidence, 0.0),
      LabelField(w, h, FieldKind::label, kInvalidLabel),
      scene.camera_motion,
      {}};

  const RigidTransform to_frame1 = scene.camera_motion.inverse();
  const Mat3 k0_inv = scene.K0.inverse_matrix();
  const Mat3 k1_inv = scene.K1.inverse_matrix();

  // Scene at time 1 expressed in frame-1 coordinates, for occlusion tests.
  std::vector<Primitive> frame1_geometry;
  frame1_geometry.reserve(scene.bodies.size());
  for (const auto& body : scene.bodies)
    frame1_geometry.push_back(transform_primitive(body.geometry, to_frame1.compose(body.motion)));

  std::atomic<long> hits{0};
  parallel_for(static_cast<std::size_t>(h), 1, [&](std::size_t row) {
    for (int col = 0; col < w; ++col) {
      const int i = static_cast<int>(row);
      const Pixel p0 = pixel_center(i, col);
      Vec3 dir = k0_inv * p0.homogeneous();
      dir /= dir.z();  // ray parameter == frame-0 depth

      Hit best;
      std::size_t best_body = 0;
      for (std::size_t b = 0; b < scene.bodies.size(); ++b) {
        const Hit hit = intersect(Vec3::Zero(), dir, scene.bodies[b].geometry);
        if (hit.valid && hit.t < best.t) {
          best = hit;
          best_body = b;
        }
      }
      if (!best.valid) continue;
      hits.fetch_add(1, std::memory_order_relaxed);

      const auto& body = scene.bodies[best_body];
      const Vec3 x0 = best.t * dir;
      const Vec3 x1_world = body.motion.apply(x0);
      const Vec3 p1_cam = to_frame1.apply(x1_world);
      const double z0 = x0.z();
      const double z1 = p1_cam.z();
      if (z1 <= 0.0) continue;  // validated scenes should not reach this
      const Pixel p1 = project(p1_cam, scene.K1);

      gt.flow.set_vec2(i, col, Vec2(p1.u - p0.u, p1.v - p0.v));
      gt.expansion.at(i, col) = z1 / z0;
      gt.z0.at(i, col) = z0;
      gt.z1.at(i, col) = z1;
      gt.labels.at(i, col) = body.id;

      // Occlusion: cast the frame-1 ray through p1 against the moved scene.
      Vec3 dir1 = k1_inv * p1.homogeneous();
      dir1 /= dir1.z();
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& prim : frame1_geometry) {
        const Hit hit = intersect(Vec3::Zero(), dir1, prim);
        if (hit.valid && hit.t < nearest) nearest = hit.t;
      }
      const bool occluded = nearest < z1 * (1.0 - 1e-9) - 1e-12;
      gt.occlusion.at(i, col) = occluded ? 1.0 : 0.0;
      gt.confidence.at(i, col) = occluded ? 0.0 : 0.9;
    }
  });

  if (hits.load() == 0) throw std::invalid_argument("scene: no visible points");

  gt.bodies.push_back(BodyTruth{0, RigidTransform::identity(), to_frame1,
                                to_frame1.T_vec.norm()});
  for (const auto& body : scene.bodies) {
    if (body.id == 0) continue;
    const RigidTransform f01 = to_frame1.compose(body.motion);
    gt.bodies.push_back(BodyTruth{body.id, body.motion, f01, f01.T_vec.norm()});
  }
  std::sort(gt.bodies.begin(), gt.bodies.end(),
            [](const BodyTruth& a, const BodyTruth& b) { return a.id < b.id; });
  return gt;
}

CorruptedInputs corrupt(const GroundTruth& gt, const NoiseConfig& noise) {
  CorruptedInputs out{gt.flow, gt.expansion, gt.z0, gt.confidence};
  Rng rng(noise.seed);
  const int w = gt.flow.width(), h = gt.flow.height();

  std::vector<std::pair<int, int>> valid;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (gt.confidence.at(i, j) > 0.5) valid.emplace_back(i, j);

  if (noise.flow_sigma > 0.0) {
    for (const auto& [i, j] : valid) {
      out.flow.at(i, j, 0) += rng.normal(0.0, noise.flow_sigma);
      out.flow.at(i, j, 1) += rng.normal(0.0, noise.flow_sigma);
    }
  }
  if (noise.expansion_sigma > 0.0) {
    for (const auto& [i, j] : valid)
      out.expansion.at(i, j) *= std::exp(rng.normal(0.0, noise.expansion_sigma));
  }

  if (noise.outlier_fraction > 0.0 && !valid.empty()) {
    const std::size_t n_out =
        static_cast<std::size_t>(noise.outlier_fraction * static_cast<double>(valid.size()));
    for (std::size_t k : rng.sample_without_replacement(valid.size(), n_out)) {
      const auto& [i, j] = valid[k];
      out.flow.at(i, j, 0) = rng.uniform(-20.0, 20.0);
      out.flow.at(i, j, 1) = rng.uniform(-20.0, 20.0);
      out.confidence.at(i, j) = 0.4;
    }
  }

  switch (noise.prior_model) {
    case PriorDepthModel::exact:
      break;
    case PriorDepthModel::scaled:
      for (double& z : out.z_prior.data()) z *= noise.prior_scale;
      break;
    case PriorDepthModel::smooth_ramp:
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          const double f = noise.prior_ramp_lo +
                           (noise.prior_ramp_hi - noise.prior_ramp_lo) *
                               (w > 1 ? static_cast<double>(j) / (w - 1) : 0.0);
          out.z_prior.at(i, j) *= f;
        }
      break;
    case PriorDepthModel::noisy:
      for (const auto& [i, j] : valid)
        out.z_prior.at(i, j) *= std::exp(rng.normal(0.0, noise.prior_sigma_log));
      break;
  }
  return out;
}

ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "general") return ScenarioKind::general;
  if (name == "coplanar") return ScenarioKind::coplanar;
  if (name == "collinear") return ScenarioKind::collinear;
  if (name == "zero_translation") return ScenarioKind::zero_translation;
  if (name == "pure_rotation") return ScenarioKind::pure_rotation;
  throw std::invalid_argument("unknown scenario: " + name);
}

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::general: return "general";
    case ScenarioKind::coplanar: return "coplanar";
    case ScenarioKind::collinear: return "collinear";
    case ScenarioKind::zero_translation: return "zero_translation";
    case ScenarioKind::pure_rotation: return "pure_rotation";
  }
  return "general";
}

namespace {

void add_default_background(SceneDescription& scene) {
  // Ground plane plus a back wall; two planes keep the essential-matrix
  // problem well conditioned (a single plane would be a homography-degenerate
  // structure). A static box adds depth variety.
  scene.bodies.push_back(Body{0, PlanarPatch{Vec3(-9.0, 1.6, 1.8), Vec3(18.0, 0.0, 0.0),
                                             Vec3(0.0, 0.0, 11.0)}});
  scene.bodies.push_back(Body{0, PlanarPatch{Vec3(-8.0, -6.0, 12.5), Vec3(16.0, 0.0, 0.0),
                                             Vec3(0.0, 12.0, 0.0)}});
  scene.bodies.push_back(
      Body{0, BoxBody{Vec3(1.35, 1.12, 6.2), Vec3(0.45, 0.45, 0.45)}});
}

double jitter(Rng& rng, double value, double rel) {
  return value * (1.0 + rel * (rng.uniform() - 0.5));
}

}  // namespace

SceneDescription make_degenerate_scenario(ScenarioKind kind, std::uint64_t seed) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(kind)));
  SceneDescription scene;
  scene.width = 320;
  scene.height = 240;
  scene.K0 = CameraIntrinsics(320.0, 320.0, 160.0, 120.0);
  scene.K1 = scene.K0;
  add_default_background(scene);

  switch (kind) {
    case ScenarioKind::general: {
      const Vec3 axis(0.25, 0.9, 0.35);
      scene.camera_motion = RigidTransform::from_axis_angle(
          axis, deg2rad(jitter(rng, 0.7, 0.3)),
          Vec3(jitter(rng, 0.26, 0.2), jitter(rng, 0.035, 0.2), jitter(rng, 0.11, 0.2)));
      // Corner-on orientation: three visible faces, so no single plane covers
      // a majority of the segment (a fronto-parallel face would tie the
      // per-body essential fit with homography-family impostors).
      const Mat3 corner_on =
          Eigen::AngleAxisd(0.62, Vec3(0.25, 1.0, 0.2).normalized()).toRotationMatrix() *
          Eigen::AngleAxisd(0.45, Vec3(1.0, 0.0, 0.1).normalized()).toRotationMatrix();
      scene.bodies.push_back(
          Body{1, BoxBody{Vec3(jitter(rng, -1.0, 0.1), 0.35, jitter(rng, 5.0, 0.08)),
                          Vec3(0.5, 0.42, 0.45), corner_on},
               RigidTransform(Mat3::Identity(),
                              Vec3(jitter(rng, 0.04, 0.3), jitter(rng, -0.34, 0.2),
                                   jitter(rng, 0.06, 0.3)))});
      scene.bodies.push_back(
          Body{2, SphereBody{Vec3(jitter(rng, 1.45, 0.1), jitter(rng, -0.70, 0.1),
                                  jitter(rng, 7.8, 0.05)),
                             0.62},
               RigidTransform(Mat3::Identity(),
                              Vec3(jitter(rng, -0.06, 0.3), jitter(rng, 0.30, 0.2),
                                   jitter(rng, -0.10, 0.3)))});
      break;
    }
    case ScenarioKind::coplanar: {
      // A patch inside one epipolar plane, translating within it: the plane
      // spanned by the pixel-center rays of a single image row, with the
      // camera translation constrained to the same plane. Only such edge-on
      // geometry makes independent motion exactly epipolar-consistent over
      // an extended region.
      const int strip_row = 150;
      const double m = (strip_row + 0.5 - scene.K0.cy) / scene.K0.fy;
      const Vec3 d1(1.0, 0.0, 0.0);
      const Vec3 d2(0.0, m, 1.0);
      const double ct1 = jitter(rng, 0.30, 0.2);
      const double ct2 = jitter(rng, 0.10, 0.2);
      scene.camera_motion = RigidTransform::from_axis_angle(
          Vec3(0.1, 1.0, 0.2), deg2rad(0.5), ct1 * d1 + ct2 * d2);
      const double a0 = -1.3, a1 = 0.7, b0 = jitter(rng, 4.2, 0.05), b1 = b0 + 2.6;
      scene.bodies.push_back(
          Body{1, PlanarPatch{a0 * d1 + b0 * d2, (a1 - a0) * d1, (b1 - b0) * d2},
               RigidTransform(Mat3::Identity(),
                              jitter(rng, -0.25, 0.2) * d1 + jitter(rng, -0.60, 0.15) * d2)});
      break;
    }
    case ScenarioKind::collinear: {
      const Vec3 tc(jitter(rng, 0.30, 0.2), 0.0, jitter(rng, 0.06, 0.2));
      scene.camera_motion =
          RigidTransform::from_axis_angle(Vec3(0.15, 1.0, 0.1), deg2rad(0.8), tc);
      // Mover translating antiparallel to the camera translation.
      scene.bodies.push_back(
          Body{1, BoxBody{Vec3(jitter(rng, -0.9, 0.1), 0.15, jitter(rng, 5.2, 0.06)),
                          Vec3(0.55, 0.5, 0.5)},
               RigidTransform(Mat3::Identity(), Vec3(-1.5 * tc))});
      break;
    }
    case ScenarioKind::zero_translation: {
      scene.camera_motion = RigidTransform::from_axis_angle(
          Vec3(0.3, 0.8, 0.5), deg2rad(jitter(rng, 1.2, 0.3)), Vec3::Zero());
      scene.bodies.push_back(
          Body{1, BoxBody{Vec3(jitter(rng, -1.0, 0.1), 0.35, jitter(rng, 5.0, 0.08)),
                          Vec3(0.5, 0.42, 0.45)},
               RigidTransform(Mat3::Identity(),
                              Vec3(jitter(rng, 0.32, 0.2), jitter(rng, -0.22, 0.2),
                                   jitter(rng, 0.10, 0.3)))});
      scene.bodies.push_back(
          Body{2, SphereBody{Vec3(jitter(rng, 1.45, 0.1), jitter(rng, -0.70, 0.1),
                                  jitter(rng, 7.8, 0.05)),
                             0.62},
               RigidTransform(Mat3::Identity(),
                              Vec3(jitter(rng, -0.25, 0.2), jitter(rng, 0.28, 0.2),
                                   jitter(rng, 0.15, 0.3)))});
      break;
    }
    case ScenarioKind::pure_rotation: {
      scene.camera_motion = RigidTransform::from_axis_angle(
          Vec3(0.2, 0.9, 0.3), deg2rad(jitter(rng, 1.5, 0.3)), Vec3::Zero());
      break;
    }
  }
  return scene;
}

}  // namespace rigidkit::simkit
