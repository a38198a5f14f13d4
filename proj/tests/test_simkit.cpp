#include <doctest.h>

#include <cmath>

#include "rigidkit/simkit.hpp"
#include "testutil.hpp"

using namespace rigidkit;
using namespace rigidkit::simkit;

namespace {

SceneDescription fronto_plane_scene(const RigidTransform& camera_motion, double z = 10.0) {
  SceneDescription scene;
  scene.width = 64;
  scene.height = 48;
  scene.K0 = CameraIntrinsics(64.0, 64.0, 32.0, 24.0);
  scene.K1 = scene.K0;
  scene.camera_motion = camera_motion;
  scene.bodies.push_back(Body{
      0, PlanarPatch{Vec3(-40.0, -30.0, z), Vec3(80.0, 0.0, 0.0), Vec3(0.0, 60.0, 0.0)}});
  return scene;
}

}  // namespace

TEST_CASE("identity scene: zero flow, unit expansion, equal depths") {
  const auto gt = render(fronto_plane_scene(RigidTransform::identity()));
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      REQUIRE(gt.labels.at(i, j) == 0);
      CHECK(gt.flow.at(i, j, 0) == 0.0);
      CHECK(gt.flow.at(i, j, 1) == 0.0);
      CHECK(gt.expansion.at(i, j) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(gt.z0.at(i, j) == doctest::Approx(gt.z1.at(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("forward motion toward a fronto-parallel plane gives tau = 0.9") {
  const auto gt = render(fronto_plane_scene(
      RigidTransform(Mat3::Identity(), Vec3(0.0, 0.0, 1.0)), 10.0));
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      CHECK(gt.z0.at(i, j) == doctest::Approx(10.0).epsilon(1e-12));
      CHECK(gt.z1.at(i, j) == doctest::Approx(9.0).epsilon(1e-12));
      CHECK(gt.expansion.at(i, j) == doctest::Approx(0.9).epsilon(1e-12));
    }
}

TEST_CASE("expansion equals Z1/Z0 at every rendered pixel") {
  for (auto kind : {ScenarioKind::general, ScenarioKind::collinear, ScenarioKind::coplanar}) {
    const auto gt = render(make_degenerate_scenario(kind, 5));
    for (int i = 0; i < gt.flow.height(); ++i)
      for (int j = 0; j < gt.flow.width(); ++j) {
        if (gt.labels.at(i, j) == kInvalidLabel) continue;
        const double tau = gt.expansion.at(i, j);
        const double ratio = gt.z1.at(i, j) / gt.z0.at(i, j);
        CHECK(std::abs(tau - ratio) < 1e-9 * std::max(1.0, ratio));
      }
  }
}

TEST_CASE("scenario scenes cover the frame and contain the advertised movers") {
  for (auto kind : {ScenarioKind::general, ScenarioKind::coplanar, ScenarioKind::collinear,
                    ScenarioKind::zero_translation, ScenarioKind::pure_rotation}) {
    const auto scene = make_degenerate_scenario(kind, 0);
    const auto gt = render(scene);
    long invalid = 0, mover = 0;
    for (int i = 0; i < gt.labels.height(); ++i)
      for (int j = 0; j < gt.labels.width(); ++j) {
        if (gt.labels.at(i, j) == kInvalidLabel) ++invalid;
        if (gt.labels.at(i, j) > 0) ++mover;
      }
    CHECK(invalid == 0);
    if (kind == ScenarioKind::pure_rotation) {
      CHECK(mover == 0);
    } else {
      CHECK(mover >= 100);
    }
  }
}

TEST_CASE("coplanar scenario: the mover stays on its epipolar lines") {
  const auto scene = make_degenerate_scenario(ScenarioKind::coplanar, 1);
  const auto gt = render(scene);
  const Mat3 f =
      fundamental_from_essential(essential_from_motion(gt.ego), scene.K0, scene.K1);
  long mover_pixels = 0;
  double worst_sampson = 0.0;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      if (gt.labels.at(i, j) != 1) continue;
      ++mover_pixels;
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1(p0.u + gt.flow.at(i, j, 0), p0.v + gt.flow.at(i, j, 1), 1.0);
      worst_sampson =
          std::max(worst_sampson, sampson_squared(f, p0.homogeneous(), p1, 1e-9));
      // And the motion is real: nonzero flow.
      CHECK(gt.flow.vec2(i, j).norm() > 1.0);
    }
  CHECK(mover_pixels >= 50);
  CHECK(worst_sampson < 1e-9);
}

TEST_CASE("collinear scenario: rectified flow direction matches -Tc on the mover") {
  const auto scene = make_degenerate_scenario(ScenarioKind::collinear, 2);
  const auto gt = render(scene);
  const Mat3 h = rotational_homography(scene.K0, scene.K1, gt.ego.R);
  const Mat3 k0i = scene.K0.inverse_matrix();
  long mover_pixels = 0;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      if (gt.labels.at(i, j) != 1) continue;
      ++mover_pixels;
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1(p0.u + gt.flow.at(i, j, 0), p0.v + gt.flow.at(i, j, 1), 1.0);
      const Vec3 tsf = k0i * (gt.expansion.at(i, j) * (h * p1) - p0.homogeneous());
      CHECK(rad2deg(angle_between(tsf, Vec3(-gt.ego.T_vec))) < 1.0);
    }
  CHECK(mover_pixels >= 500);
}

TEST_CASE("pure rotation scenario: homography transfer explains every pixel") {
  const auto scene = make_degenerate_scenario(ScenarioKind::pure_rotation, 4);
  const auto gt = render(scene);
  const Mat3 h = rotational_homography(scene.K0, scene.K1, gt.ego.R);
  double worst = 0.0;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1(p0.u + gt.flow.at(i, j, 0), p0.v + gt.flow.at(i, j, 1), 1.0);
      worst = std::max(worst,
                       (homography_transfer(h, p1) - Vec2(p0.u, p0.v)).norm());
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("rendering is deterministic") {
  const auto scene = make_degenerate_scenario(ScenarioKind::general, 9);
  const auto a = render(scene);
  const auto b = render(scene);
  CHECK(a.flow.data() == b.flow.data());
  CHECK(a.z0.data() == b.z0.data());
  CHECK(a.labels.data() == b.labels.data());
}

TEST_CASE("scene validation rejects bodies behind a camera") {
  auto scene = fronto_plane_scene(RigidTransform::identity());
  scene.bodies.push_back(
      Body{1, SphereBody{Vec3(0.0, 0.0, -3.0), 0.5}, RigidTransform::identity()});
  CHECK_THROWS_AS(render(scene), std::invalid_argument);

  // Moving behind the frame-1 camera is rejected too.
  auto scene2 = fronto_plane_scene(RigidTransform::identity());
  scene2.bodies.push_back(Body{1, SphereBody{Vec3(0.0, 0.0, 2.0), 0.5},
                               RigidTransform(Mat3::Identity(), Vec3(0.0, 0.0, -5.0))});
  CHECK_THROWS_AS(render(scene2), std::invalid_argument);
}

TEST_CASE("heightfield background renders with exact correspondences") {
  SceneDescription scene;
  scene.width = 80;
  scene.height = 60;
  scene.K0 = CameraIntrinsics(80.0, 80.0, 40.0, 30.0);
  scene.K1 = scene.K0;
  scene.camera_motion = RigidTransform::from_axis_angle(Vec3(0.2, 1.0, 0.1), deg2rad(0.6),
                                                        Vec3(0.2, 0.02, 0.05));
  scene.bodies.push_back(Body{
      0, HeightFieldPatch{Vec3(-7.0, -6.0, 9.0), Vec3(14.0, 0.0, 0.0),
                          Vec3(0.0, 12.0, 0.0), 0.8, 2.0, 3.0}});
  const auto gt = render(scene);
  const Mat3 f =
      fundamental_from_essential(essential_from_motion(gt.ego), scene.K0, scene.K1);
  long rendered = 0;
  double worst = 0.0, zmin = 1e30, zmax = -1e30;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      if (gt.labels.at(i, j) == kInvalidLabel) continue;
      ++rendered;
      zmin = std::min(zmin, gt.z0.at(i, j));
      zmax = std::max(zmax, gt.z0.at(i, j));
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1(p0.u + gt.flow.at(i, j, 0), p0.v + gt.flow.at(i, j, 1), 1.0);
      worst = std::max(worst, std::abs(p1.dot(f * p0.homogeneous())));
    }
  CHECK(rendered > 4000);
  CHECK(worst < 1e-9);
  CHECK(zmax - zmin > 1.0);  // the surface actually undulates
}

TEST_CASE("occlusion marks pixels hidden in frame 1") {
  // A near box slides sideways, covering background that was visible in
  // frame 0.
  SceneDescription scene = fronto_plane_scene(RigidTransform::identity(), 10.0);
  scene.bodies.push_back(Body{1, BoxBody{Vec3(0.0, 0.0, 5.0), Vec3(0.8, 0.8, 0.4)},
                              RigidTransform(Mat3::Identity(), Vec3(1.2, 0.0, 0.0))});
  const auto gt = render(scene);
  long occluded = 0;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j)
      if (gt.occlusion.at(i, j) > 0.5) {
        ++occluded;
        CHECK(gt.confidence.at(i, j) == 0.0);
        CHECK(gt.labels.at(i, j) == 0);  // only background gets covered here
      }
  CHECK(occluded > 20);
}

TEST_CASE("corrupt with a zero config is the identity") {
  const auto gt = render(make_degenerate_scenario(ScenarioKind::general, 6));
  const auto inputs = corrupt(gt, NoiseConfig{});
  CHECK(inputs.flow.data() == gt.flow.data());
  CHECK(inputs.expansion.data() == gt.expansion.data());
  CHECK(inputs.z_prior.data() == gt.z0.data());
  CHECK(inputs.confidence.data() == gt.confidence.data());
}

TEST_CASE("corrupt adds flow noise with the requested standard deviation") {
  const auto gt = render(make_degenerate_scenario(ScenarioKind::general, 7));
  NoiseConfig noise;
  noise.flow_sigma = 0.5;
  noise.seed = 3;
  const auto inputs = corrupt(gt, noise);
  double acc = 0.0, acc2 = 0.0;
  long n = 0;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      if (!(gt.confidence.at(i, j) > 0.5)) continue;
      for (int c = 0; c < 2; ++c) {
        const double d = inputs.flow.at(i, j, c) - gt.flow.at(i, j, c);
        acc += d;
        acc2 += d * d;
        ++n;
      }
    }
  REQUIRE(n > 100000);
  const double mean = acc / n;
  const double std = std::sqrt(acc2 / n - mean * mean);
  CHECK(std == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("corrupt flags exactly floor(fraction * valid) outliers") {
  const auto gt = render(make_degenerate_scenario(ScenarioKind::general, 8));
  long valid = 0;
  for (double c : gt.confidence.data()) valid += c > 0.5;

  NoiseConfig noise;
  noise.outlier_fraction = 0.3;
  noise.seed = 5;
  const auto inputs = corrupt(gt, noise);
  long low = 0;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j)
      if (gt.confidence.at(i, j) > 0.5 && inputs.confidence.at(i, j) == 0.4) ++low;
  CHECK(low == static_cast<long>(0.3 * valid));

  // Determinism of the noise model.
  const auto again = corrupt(gt, noise);
  CHECK(again.flow.data() == inputs.flow.data());
  CHECK(again.confidence.data() == inputs.confidence.data());
}

TEST_CASE("smooth-ramp prior scales columns by the requested range") {
  const auto gt = render(make_degenerate_scenario(ScenarioKind::general, 10));
  NoiseConfig noise;
  noise.prior_model = PriorDepthModel::smooth_ramp;
  noise.prior_ramp_lo = 0.8;
  noise.prior_ramp_hi = 1.2;
  const auto inputs = corrupt(gt, noise);
  const int w = gt.z0.width();
  for (int i = 0; i < gt.z0.height(); i += 17)
    for (int j = 0; j < w; j += 13) {
      const double f = 0.8 + 0.4 * static_cast<double>(j) / (w - 1);
      CHECK(inputs.z_prior.at(i, j) == doctest::Approx(gt.z0.at(i, j) * f).epsilon(1e-12));
    }
}
