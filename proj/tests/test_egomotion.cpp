#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rigidkit/egomotion.hpp"
#include "rigidkit/simkit.hpp"
#include "testutil.hpp"

using namespace rigidkit;
using namespace rigidkit::egomotion;
using testutil::corr_from_gt;
using testutil::dir_err_deg;
using testutil::rot_err_deg;

namespace {

/// Static scene (background only) under the given camera motion.
simkit::SceneDescription static_scene(const RigidTransform& motion) {
  auto scene = simkit::make_degenerate_scenario(simkit::ScenarioKind::general, 0);
  scene.bodies.erase(std::remove_if(scene.bodies.begin(), scene.bodies.end(),
                                    [](const simkit::Body& b) { return b.id != 0; }),
                     scene.bodies.end());
  scene.camera_motion = motion;
  return scene;
}

RigidTransform default_motion() {
  return RigidTransform::from_axis_angle(Vec3(0.25, 0.9, 0.35), deg2rad(0.7),
                                         Vec3(0.26, 0.035, 0.11));
}

}  // namespace

TEST_CASE("sample_correspondences counts, determinism and the confidence gate") {
  FieldD flow(100, 100, FieldKind::flow, 0.5);
  FieldD conf(100, 100, FieldKind::confidence, 1.0);

  const auto a = sample_correspondences(flow, conf, 500, 42);
  CHECK(a.size() == 500);
  const auto b = sample_correspondences(flow, conf, 500, 42);
  REQUIRE(b.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.p0[i].u == b.p0[i].u);
    CHECK(a.p0[i].v == b.p0[i].v);
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.p1[i].u == doctest::Approx(a.p0[i].u + 0.5));
  }

  FieldD low(100, 100, FieldKind::confidence, 0.4);
  CHECK_THROWS_AS(sample_correspondences(flow, low, 500, 0), InsufficientDataError);
}

TEST_CASE("sample_correspondences never picks low-confidence pixels") {
  const auto gt = simkit::render(simkit::make_degenerate_scenario(simkit::ScenarioKind::general, 1));
  simkit::NoiseConfig noise;
  noise.outlier_fraction = 0.3;
  noise.seed = 17;
  const auto inputs = simkit::corrupt(gt, noise);
  const auto corr = sample_correspondences(inputs.flow, inputs.confidence, 2000, 7);
  for (double w : corr.weights) CHECK(w > 0.5);
}

TEST_CASE("five-point solver recovers the translation direction from exact data") {
  const auto scene = static_scene(RigidTransform(Mat3::Identity(), Vec3(1.0, 0.0, 0.0)));
  const auto gt = simkit::render(scene);

  // Five matches spread across wall, ground and the static box; a sample
  // from a single plane would be a degenerate five-point configuration.
  CorrespondenceSet five;
  for (const auto& [col, row] : {std::pair{40, 40}, {280, 60}, {60, 200}, {260, 225},
                                 {230, 170}}) {
    REQUIRE(gt.labels.at(row, col) == 0);
    const Pixel p0 = pixel_center(row, col);
    five.add(p0, Pixel{p0.u + gt.flow.at(row, col, 0), p0.v + gt.flow.at(row, col, 1)});
  }
  const auto candidates = five_point_essential(five, scene.K0, scene.K1);
  REQUIRE(!candidates.empty());
  CHECK(candidates.size() <= 10);

  const Mat3 k0i = scene.K0.inverse_matrix();
  const Mat3 k1i = scene.K1.inverse_matrix();
  double best_err = 1e9;
  for (const Mat3& e : candidates) {
    // Essential structure at 1e-6 relative.
    const Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullV);
    const Vec3 s = svd.singularValues();
    CHECK((s(0) - s(1)) / s(0) < 1e-6);
    CHECK(s(2) / s(0) < 1e-6);
    // Fits the five pairs.
    for (std::size_t k = 0; k < 5; ++k) {
      const Vec3 q0 = (k0i * five.p0[k].homogeneous());
      const Vec3 q1 = (k1i * five.p1[k].homogeneous());
      CHECK(std::abs(q1.dot(e * q0)) < 1e-9);
    }
    // Translation direction is the right null vector.
    best_err = std::min(best_err, dir_err_deg(Vec3(svd.matrixV().col(2)),
                                              scene.camera_motion.T_vec));
  }
  CHECK(best_err < 0.1);
}

TEST_CASE("five-point solver rejects duplicated points") {
  CorrespondenceSet corr;
  for (int k = 0; k < 5; ++k) corr.add(Pixel{100.0, 100.0}, Pixel{101.0, 100.0});
  const CameraIntrinsics k(320.0, 320.0, 160.0, 120.0);
  CHECK(five_point_essential(corr, k, k).empty());
}

TEST_CASE("five-point candidates under pure rotation fit the data with unstable t") {
  const auto scene = static_scene(
      RigidTransform::from_axis_angle(Vec3(0.2, 0.9, 0.3), deg2rad(1.5), Vec3::Zero()));
  const auto gt = simkit::render(scene);
  CorrespondenceSet five;
  for (const auto& [col, row] : {std::pair{40, 40}, {280, 60}, {60, 200}, {260, 225},
                                 {230, 170}}) {
    const Pixel p0 = pixel_center(row, col);
    five.add(p0, Pixel{p0.u + gt.flow.at(row, col, 0), p0.v + gt.flow.at(row, col, 1)});
  }
  const auto candidates = five_point_essential(five, scene.K0, scene.K1);
  REQUIRE(!candidates.empty());
  const Mat3 k0i = scene.K0.inverse_matrix();
  const Mat3 k1i = scene.K1.inverse_matrix();
  for (const Mat3& e : candidates)
    for (std::size_t k = 0; k < 5; ++k) {
      const Vec3 q0 = k0i * five.p0[k].homogeneous();
      const Vec3 q1 = k1i * five.p1[k].homogeneous();
      CHECK(std::abs(q1.dot(e * q0)) < 1e-9);
    }
}

TEST_CASE("RANSAC egomotion on a noise-free static scene is sharp") {
  const auto scene = static_scene(default_motion());
  const auto gt = simkit::render(scene);
  const auto corr = testutil::subsample(corr_from_gt(gt), 1000, 3);

  const auto est = estimate_egomotion_ransac(corr, scene.K0, scene.K1, RansacConfig{}, 0);
  CHECK(!est.degenerate);
  CHECK(rot_err_deg(est.transform.R, gt.ego.R) < 0.01);
  CHECK(dir_err_deg(est.transform.T_vec, gt.ego.T_vec) < 0.1);
  CHECK(est.transform.T_vec.norm() == doctest::Approx(1.0).epsilon(1e-9));

  // Contract: every flagged inlier satisfies the Sampson bound.
  const auto dist = sampson_distances(corr, scene.K0, scene.K1,
                                      essential_from_motion(est.transform));
  for (std::size_t i = 0; i < corr.size(); ++i)
    if (est.inlier_mask[i]) CHECK(dist[i] < RansacConfig{}.sampson_threshold);
}

TEST_CASE("RANSAC egomotion survives 30% uniform outliers") {
  const auto scene = static_scene(default_motion());
  const auto gt = simkit::render(scene);
  auto corr = testutil::subsample(corr_from_gt(gt), 1500, 5);
  testutil::inject_outliers(corr, 0.30, 99);

  const auto est = estimate_egomotion_ransac(corr, scene.K0, scene.K1, RansacConfig{}, 1);
  CHECK(!est.degenerate);
  CHECK(rot_err_deg(est.transform.R, gt.ego.R) < 0.1);
  CHECK(dir_err_deg(est.transform.T_vec, gt.ego.T_vec) < 0.5);
}

TEST_CASE("RANSAC is deterministic given a seed and thread-count independent") {
  const auto scene = static_scene(default_motion());
  const auto gt = simkit::render(scene);
  auto corr = testutil::subsample(corr_from_gt(gt), 800, 2);
  testutil::inject_outliers(corr, 0.2, 4);

  RansacConfig cfg1;
  cfg1.threads = 1;
  RansacConfig cfg8;
  cfg8.threads = 8;
  const auto a = estimate_egomotion_ransac(corr, scene.K0, scene.K1, cfg1, 11);
  const auto b = estimate_egomotion_ransac(corr, scene.K0, scene.K1, cfg1, 11);
  const auto c = estimate_egomotion_ransac(corr, scene.K0, scene.K1, cfg8, 11);
  CHECK((a.transform.R - b.transform.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.transform.T_vec - b.transform.T_vec).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.inlier_mask == b.inlier_mask);
  CHECK((a.transform.R - c.transform.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.transform.T_vec - c.transform.T_vec).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.inlier_mask == c.inlier_mask);
}

TEST_CASE("static camera with movers is flagged degenerate") {
  auto scene = simkit::make_degenerate_scenario(simkit::ScenarioKind::zero_translation, 0);
  scene.camera_motion = RigidTransform::identity();  // fully static camera
  const auto gt = simkit::render(scene);
  const auto corr = testutil::subsample(corr_from_gt(gt), 1200, 6);
  const auto est = estimate_egomotion_ransac(corr, scene.K0, scene.K1, RansacConfig{}, 0);
  CHECK(est.degenerate);
  CHECK(est.transform.T_vec.norm() == 0.0);
  CHECK(rot_err_deg(est.transform.R, Mat3::Identity()) < 0.05);
}

TEST_CASE("zero-translation rotating camera is flagged degenerate with the right R") {
  const auto scene = simkit::make_degenerate_scenario(simkit::ScenarioKind::zero_translation, 3);
  const auto gt = simkit::render(scene);
  const auto corr = testutil::subsample(corr_from_gt(gt), 1200, 8);
  const auto est = estimate_egomotion_ransac(corr, scene.K0, scene.K1, RansacConfig{}, 0);
  CHECK(est.degenerate);
  CHECK(rot_err_deg(est.transform.R, gt.ego.R) < 0.05);
}

TEST_CASE("degeneracy test separates translating from rotation-only scenes") {
  const auto scene = static_scene(default_motion());
  const auto gt = simkit::render(scene);
  const auto corr = testutil::subsample(corr_from_gt(gt), 600, 9);
  const Mat3 e = essential_from_motion(gt.ego);
  CHECK(!detect_degenerate_translation(corr, scene.K0, scene.K1, e, gt.ego.R, 0.01));

  const auto rot_scene = static_scene(
      RigidTransform::from_axis_angle(Vec3(0.3, 0.8, 0.5), deg2rad(1.2), Vec3::Zero()));
  const auto rot_gt = simkit::render(rot_scene);
  const auto rot_corr = testutil::subsample(corr_from_gt(rot_gt), 600, 10);
  // Any valid essential matrix competes; the homography still explains all.
  const Mat3 e_any = essential_from_motion(rot_gt.ego.R, Vec3(1.0, 0.0, 0.0));
  CHECK(detect_degenerate_translation(rot_corr, rot_scene.K0, rot_scene.K1, e_any,
                                      rot_gt.ego.R, 0.01));
}

TEST_CASE("LMedS essential fit matches ground truth and survives 45% outliers") {
  const auto scene = static_scene(default_motion());
  const auto gt = simkit::render(scene);
  auto corr = testutil::subsample(corr_from_gt(gt), 1000, 12);

  const auto clean = estimate_essential_lmeds(corr, scene.K0, scene.K1, 0);
  CHECK(rot_err_deg(clean.transform.R, gt.ego.R) < 0.1);
  CHECK(dir_err_deg(clean.transform.T_vec, gt.ego.T_vec) < 0.5);

  testutil::inject_outliers(corr, 0.45, 7);
  const auto robust = estimate_essential_lmeds(corr, scene.K0, scene.K1, 0);
  CHECK(dir_err_deg(robust.transform.T_vec, gt.ego.T_vec) < 1.0);
}

TEST_CASE("LMedS on the minimal five pairs fits exactly") {
  const auto scene = static_scene(default_motion());
  const auto gt = simkit::render(scene);
  const auto all = corr_from_gt(gt);
  CorrespondenceSet five;
  for (std::size_t k = 0; k < 5; ++k) {
    const std::size_t idx = (k * 7919 + 2027) % all.size();
    five.add(all.p0[idx], all.p1[idx]);
  }
  const auto est = estimate_essential_lmeds(five, scene.K0, scene.K1, 0);
  CHECK(est.residual_median < 1e-9);
}

TEST_CASE("decompose_essential recovers forward motion and ignores the sign of E") {
  const auto scene = static_scene(RigidTransform(Mat3::Identity(), Vec3(0.0, 0.0, 1.0)));
  const auto gt = simkit::render(scene);
  const auto corr = testutil::subsample(corr_from_gt(gt), 400, 13);

  const Mat3 e = essential_from_motion(gt.ego);
  const auto rt = decompose_essential(e, corr, scene.K0, scene.K1);
  CHECK(rot_err_deg(rt.R, Mat3::Identity()) < 0.01);
  CHECK(rad2deg(angle_between(rt.T_vec, Vec3(0.0, 0.0, 1.0))) < 0.1);
  CHECK(rt.T_vec.norm() == doctest::Approx(1.0).epsilon(1e-12));

  const auto rt_neg = decompose_essential(Mat3(-e), corr, scene.K0, scene.K1);
  CHECK((rt.R - rt_neg.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((rt.T_vec - rt_neg.T_vec).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decompose_essential fails cheirality on zero-parallax data") {
  // Points effectively at infinity: identical pixels in both frames.
  CorrespondenceSet corr;
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Pixel p{rng.uniform(10.0, 310.0), rng.uniform(10.0, 230.0)};
    corr.add(p, p);
  }
  const CameraIntrinsics k(320.0, 320.0, 160.0, 120.0);
  const Mat3 e = essential_from_motion(Mat3::Identity(), Vec3(1.0, 0.0, 0.0));
  CHECK_THROWS_AS(decompose_essential(e, corr, k, k), CheiralityError);
}

TEST_CASE("decompose_essential validates essential structure") {
  CorrespondenceSet corr;
  corr.add(Pixel{10, 10}, Pixel{11, 10});
  const CameraIntrinsics k(320.0, 320.0, 160.0, 120.0);
  Mat3 not_essential;
  not_essential << 1, 0, 0, 0, 0.5, 0, 0, 0, 0.1;
  CHECK_THROWS_AS(decompose_essential(not_essential, corr, k, k), std::invalid_argument);
}

TEST_CASE("estimation failure carries the best attempt") {
  // Pure garbage: no epipolar model reaches half the pairs.
  CorrespondenceSet corr;
  Rng rng(5);
  for (int k = 0; k < 300; ++k)
    corr.add(Pixel{rng.uniform(0.0, 320.0), rng.uniform(0.0, 240.0)},
             Pixel{rng.uniform(0.0, 320.0), rng.uniform(0.0, 240.0)});
  const CameraIntrinsics k(320.0, 320.0, 160.0, 120.0);
  RansacConfig cfg;
  cfg.iterations = 60;
  cfg.sampson_threshold = 1e-4;
  try {
    (void)estimate_egomotion_ransac(corr, k, k, cfg, 0);
    FAIL("expected EstimationFailure");
  } catch (const EstimationFailure& e) {
    CHECK(e.best_attempt.inlier_mask.size() == corr.size());
  }
}
