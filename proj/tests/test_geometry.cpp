#include <doctest.h>

#include "rigidkit/geometry.hpp"
#include "rigidkit/rng.hpp"
#include "rigidkit/simkit.hpp"
#include "testutil.hpp"

using namespace rigidkit;

TEST_CASE("backproject principal ray and unit offset") {
  const CameraIntrinsics k(320.0, 330.0, 160.5, 120.25);
  const Point3 p = backproject(Pixel{k.cx, k.cy}, 5.0, k);
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.z == doctest::Approx(5.0));

  const Point3 q = backproject(Pixel{k.cx + k.fx, k.cy}, 1.0, k);
  CHECK(q.x == doctest::Approx(1.0));
  CHECK(q.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.z == doctest::Approx(1.0));

  CHECK_THROWS_AS(backproject(Pixel{10.0, 10.0}, 0.0, k), std::domain_error);
  CHECK_THROWS_AS(backproject(Pixel{10.0, 10.0}, -2.0, k), std::domain_error);
}

TEST_CASE("project basic cases and behind-camera error") {
  const CameraIntrinsics k(100.0, 100.0, 50.0, 60.0);
  for (double z : {0.5, 1.0, 7.0}) {
    const Pixel p = project(Point3{0.0, 0.0, z}, k);
    CHECK(p.u == doctest::Approx(k.cx));
    CHECK(p.v == doctest::Approx(k.cy));
  }
  const Pixel p = project(Point3{1.0, 0.0, 1.0}, k);
  CHECK(p.u == doctest::Approx(150.0));
  CHECK(p.v == doctest::Approx(k.cy));
  CHECK_THROWS_AS(project(Point3{0.0, 0.0, -1.0}, k), BehindCameraError);
}

TEST_CASE("project(backproject) is the identity") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const CameraIntrinsics k(rng.uniform(100.0, 800.0), rng.uniform(100.0, 800.0),
                             rng.uniform(100.0, 400.0), rng.uniform(80.0, 300.0),
                             rng.uniform(-2.0, 2.0));
    const Pixel p{rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
    const double z = rng.uniform(0.1, 100.0);
    const Pixel q = project(backproject(p, z, k), k);
    CHECK(std::abs(q.u - p.u) < 1e-9);
    CHECK(std::abs(q.v - p.v) < 1e-9);
  }
}

TEST_CASE("rotational homography identity and calibrated rotation") {
  const CameraIntrinsics k(320.0, 320.0, 160.0, 120.0);
  const Mat3 h = rotational_homography(k, k, Mat3::Identity());
  CHECK((h - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  const CameraIntrinsics pinhole(1.0, 1.0, 0.0, 0.0);
  const Mat3 rz = Eigen::AngleAxisd(0.3, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 hz = rotational_homography(pinhole, pinhole, rz);
  CHECK((hz - rz).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotational homography is a group homomorphism for equal K") {
  Rng rng(7);
  const CameraIntrinsics k(400.0, 410.0, 320.0, 240.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 a1(rng.normal(), rng.normal(), rng.normal());
    const Vec3 a2(rng.normal(), rng.normal(), rng.normal());
    const Mat3 r1 = Eigen::AngleAxisd(rng.uniform(0.0, 1.0), a1.normalized()).toRotationMatrix();
    const Mat3 r2 = Eigen::AngleAxisd(rng.uniform(0.0, 1.0), a2.normalized()).toRotationMatrix();
    const Mat3 lhs = rotational_homography(k, k, Mat3(r1 * r2));
    const Mat3 rhs = rotational_homography(k, k, r1) * rotational_homography(k, k, r2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("essential matrix from pure translation is the cross-product matrix") {
  const Mat3 e = essential_from_motion(Mat3::Identity(), Vec3(1.0, 0.0, 0.0));
  Mat3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK((e - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(essential_from_motion(Mat3::Identity(), Vec3::Zero()), std::domain_error);
}

TEST_CASE("essential matrices have singular values (s, s, 0)") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    const Mat3 r = Eigen::AngleAxisd(rng.uniform(0.0, 2.0), axis.normalized()).toRotationMatrix();
    const Vec3 t(rng.normal(), rng.normal(), rng.normal());
    if (t.norm() < 1e-3) continue;
    const Mat3 e = essential_from_motion(r, t);
    const Eigen::JacobiSVD<Mat3> svd(e);
    const Vec3 s = svd.singularValues();
    CHECK((s(0) - s(1)) / s(0) < 1e-9);
    CHECK(s(2) / s(0) < 1e-9);
  }
}

TEST_CASE("static pixels of a rendered scene satisfy the epipolar constraint") {
  const auto scene = simkit::make_degenerate_scenario(simkit::ScenarioKind::general, 3);
  const auto gt = simkit::render(scene);
  const Mat3 e = essential_from_motion(gt.ego);
  const Mat3 f = fundamental_from_essential(e, scene.K0, scene.K1);
  double worst = 0.0;
  for (int i = 0; i < gt.flow.height(); ++i)
    for (int j = 0; j < gt.flow.width(); ++j) {
      if (gt.labels.at(i, j) != 0) continue;
      const Pixel p0 = pixel_center(i, j);
      const Vec3 p1(p0.u + gt.flow.at(i, j, 0), p0.v + gt.flow.at(i, j, 1), 1.0);
      worst = std::max(worst, std::abs(p1.dot(f * p0.homogeneous())));
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("rigid transform rejects non-rotations") {
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 1.5;
  CHECK_THROWS_AS(RigidTransform(bad, Vec3::Zero()), std::invalid_argument);
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  CHECK_THROWS_AS(RigidTransform(reflect, Vec3::Zero()), std::invalid_argument);
}

TEST_CASE("quaternion construction matches axis-angle") {
  const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
  const double angle = 0.37;
  const auto a = RigidTransform::from_axis_angle(axis, angle);
  const Eigen::Quaterniond q(Eigen::AngleAxisd(angle, axis));
  const auto b = RigidTransform::from_quaternion(q.w(), q.x(), q.y(), q.z());
  CHECK(testutil::rot_err_deg(a.R, b.R) < 1e-10);
}
