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

#include <Eigen/Dense>

#include <stdexcept>

#include "rigidkit/core.hpp"
#include "rigidkit/errors.hpp"

namespace rigidkit {

// Conventions used throughout:
//  - Image coordinates are continuous with the pixel-center convention:
//    integer pixel (row i, col j) has coordinates (u, v) = (j + 0.5, i + 0.5).
//  - Camera egomotion (R, T) maps frame-1 camera coordinates into frame-0
//    camera coordinates: x0 = R * x1 + T. Equivalently, T is the position of
//    the frame-1 camera center expressed in frame-0 coordinates.
//  - Per-body transforms used for scene flow go the other way (frame 0 to
//    frame 1); see rigidfit.

/// Pinhole calibration. Upper-triangular 3x3 with unit bottom-right entry.
template <typename T>
struct CameraIntrinsicsT {
  T fx, fy, cx, cy;
  T skew = T(0);

  CameraIntrinsicsT(T fx_, T fy_, T cx_, T cy_, T skew_ = T(0))
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), skew(skew_) {
    if (!(fx > T(0)) || !(fy > T(0)))
      throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
  }

  Mat3T<T> matrix() const {
    Mat3T<T> k;
    k << fx, skew, cx, T(0), fy, cy, T(0), T(0), T(1);
    return k;
  }

  Mat3T<T> inverse_matrix() const {
    Mat3T<T> ki;
    ki << T(1) / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy),
        T(0), T(1) / fy, -cy / fy,
        T(0), T(0), T(1);
    return ki;
  }
};

/// SE(3) element: x -> R * x + T.
template <typename T>
struct RigidTransformT {
  Mat3T<T> R = Mat3T<T>::Identity();
  Vec3T<T> T_vec = Vec3T<T>::Zero();

  RigidTransformT() = default;

  RigidTransformT(const Mat3T<T>& r, const Vec3T<T>& t) : R(r), T_vec(t) {
    const Mat3T<T> gram = R.transpose() * R - Mat3T<T>::Identity();
    if (gram.cwiseAbs().maxCoeff() > T(1e-9) || std::abs(R.determinant() - T(1)) > T(1e-9))
      throw std::invalid_argument("RigidTransform: R is not a rotation");
  }

  static RigidTransformT identity() { return RigidTransformT(); }

  static RigidTransformT from_axis_angle(const Vec3T<T>& axis, T angle_rad,
                                         const Vec3T<T>& t = Vec3T<T>::Zero()) {
    const Vec3T<T> a = axis.normalized();
    return RigidTransformT(Eigen::AngleAxis<T>(angle_rad, a).toRotationMatrix(), t);
  }

  static RigidTransformT from_quaternion(T w, T x, T y, T z,
                                         const Vec3T<T>& t = Vec3T<T>::Zero()) {
    Eigen::Quaternion<T> q(w, x, y, z);
    q.normalize();
    return RigidTransformT(q.toRotationMatrix(), t);
  }

  Vec3T<T> apply(const Vec3T<T>& p) const { return R * p + T_vec; }

  RigidTransformT inverse() const {
    return RigidTransformT(Mat3T<T>(R.transpose()), Vec3T<T>(-(R.transpose() * T_vec)));
  }

  RigidTransformT compose(const RigidTransformT& other) const {
    // (this o other)(x) = this(other(x)); re-orthonormalize to keep the
    // rotation invariant tight under long products.
    Mat3T<T> r = R * other.R;
    const Eigen::JacobiSVD<Mat3T<T>> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
    return RigidTransformT(r, Vec3T<T>(R * other.T_vec + T_vec));
  }
};

template <typename T>
struct PixelT {
  T u, v;
  Vec3T<T> homogeneous() const { return Vec3T<T>(u, v, T(1)); }
};

template <typename T>
struct Point3T {
  T x, y, z;
  Vec3T<T> vec() const { return Vec3T<T>(x, y, z); }
  static Point3T from(const Vec3T<T>& v) { return {v.x(), v.y(), v.z()}; }
};

using CameraIntrinsics = CameraIntrinsicsT<double>;
using RigidTransform = RigidTransformT<double>;
using Pixel = PixelT<double>;
using Point3 = Point3T<double>;

/// Continuous image coordinates of the center of pixel (row, col).
template <typename T = double>
PixelT<T> pixel_center(int row, int col) {
  return {T(col) + T(0.5), T(row) + T(0.5)};
}

template <typename Derived>
Mat3T<typename Derived::Scalar> skew_matrix(const Eigen::MatrixBase<Derived>& v) {
  using T = typename Derived::Scalar;
  const Vec3T<T> t = v.derived();
  Mat3T<T> s;
  s << T(0), -t.z(), t.y(), t.z(), T(0), -t.x(), -t.y(), t.x(), T(0);
  return s;
}

/// Lifts a pixel to the 3D point at depth z along its viewing ray.
template <typename T>
Point3T<T> backproject(const PixelT<T>& p, T z, const CameraIntrinsicsT<T>& k) {
  if (!(z > T(0))) throw std::domain_error("backproject: depth must be positive");
  return Point3T<T>::from(z * (k.inverse_matrix() * p.homogeneous()));
}

template <typename T>
PixelT<T> project(const Point3T<T>& p, const CameraIntrinsicsT<T>& k) {
  if (!(p.z > T(0))) throw BehindCameraError("project: point is behind the camera");
  const Vec3T<T> h = k.matrix() * p.vec();
  return {h.x() / h.z(), h.y() / h.z()};
}

template <typename T>
PixelT<T> project(const Vec3T<T>& p, const CameraIntrinsicsT<T>& k) {
  return project(Point3T<T>::from(p), k);
}

/// Warp that maps frame-1 pixels into frame-0 orientation: K0 * Rc * K1^-1.
template <typename T, typename Derived>
Mat3T<T> rotational_homography(const CameraIntrinsicsT<T>& k0, const CameraIntrinsicsT<T>& k1,
                               const Eigen::MatrixBase<Derived>& rc) {
  return k0.matrix() * rc.derived() * k1.inverse_matrix();
}

/// Essential matrix of the motion x0 = Rc x1 + Tc. Satisfies
/// (K1^-1 p1)' E (K0^-1 p0) = 0 for static correspondences.
template <typename DerivedR, typename DerivedT>
Mat3T<typename DerivedR::Scalar> essential_from_motion(const Eigen::MatrixBase<DerivedR>& rc,
                                                       const Eigen::MatrixBase<DerivedT>& tc) {
  using T = typename DerivedR::Scalar;
  const Vec3T<T> t = tc.derived();
  if (t.norm() < T(1e-12))
    throw std::domain_error("essential_from_motion: translation is degenerate");
  return rc.derived().transpose() * skew_matrix(t);
}

template <typename T>
Mat3T<T> essential_from_motion(const RigidTransformT<T>& ego) {
  return essential_from_motion(ego.R, ego.T_vec);
}

template <typename T, typename Derived>
Mat3T<T> fundamental_from_essential(const Eigen::MatrixBase<Derived>& e,
                                    const CameraIntrinsicsT<T>& k0,
                                    const CameraIntrinsicsT<T>& k1) {
  return k1.inverse_matrix().transpose() * e.derived() * k0.inverse_matrix();
}

/// First-order (Sampson) squared distance of a correspondence to the
/// epipolar constraint p1' M p0 = 0, in the units of the inputs.
template <typename T>
T sampson_squared(const Mat3T<T>& m, const Vec3T<T>& p0, const Vec3T<T>& p1,
                  T eps = T(0)) {
  const Vec3T<T> l1 = m * p0;
  const Vec3T<T> l0 = m.transpose() * p1;
  const T num = p1.dot(l1);
  const T den = l1.x() * l1.x() + l1.y() * l1.y() + l0.x() * l0.x() + l0.y() * l0.y() + eps;
  if (den <= T(0)) return std::numeric_limits<T>::infinity();
  return num * num / den;
}

/// Applies a homography and returns the dehomogenized pixel.
template <typename T>
Vec2T<T> homography_transfer(const Mat3T<T>& h, const Vec3T<T>& p) {
  const Vec3T<T> q = h * p;
  return Vec2T<T>(q.x() / q.z(), q.y() / q.z());
}

/// Midpoint intersection of the rays x = t0*d0 and x = c1 + t1*d1.
template <typename T>
struct RayIntersectionT {
  Vec3T<T> point;
  T t0, t1;
  T sin_angle;  // angle between the rays; ~0 means no parallax
};

template <typename T>
RayIntersectionT<T> intersect_rays_midpoint(const Vec3T<T>& d0, const Vec3T<T>& c1,
                                            const Vec3T<T>& d1) {
  const T a = d0.dot(d0), b = d0.dot(d1), c = d1.dot(d1);
  const T e = d0.dot(c1), f = d1.dot(c1);
  const T den = a * c - b * b;
  RayIntersectionT<T> out;
  out.sin_angle = std::sqrt(std::max(T(0), den / (a * c)));
  if (den <= T(0)) {
    out.t0 = out.t1 = T(0);
    out.point = Vec3T<T>::Zero();
    return out;
  }
  out.t0 = (c * e - b * f) / den;
  out.t1 = (b * e - a * f) / den;
  out.point = T(0.5) * (out.t0 * d0 + c1 + out.t1 * d1);
  return out;
}

using RayIntersection = RayIntersectionT<double>;

}  // namespace rigidkit
