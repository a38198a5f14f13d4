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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <limits>

namespace rigidkit {

template <typename T>
using Mat3T = Eigen::Matrix<T, 3, 3>;
template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Vec2T = Eigen::Matrix<T, 2, 1>;

using Mat3 = Mat3T<double>;
using Vec3 = Vec3T<double>;
using Vec2 = Vec2T<double>;
using Mat34 = Eigen::Matrix<double, 3, 4>;

template <typename T>
constexpr T invalid_value() {
  return std::numeric_limits<T>::quiet_NaN();
}

template <typename T>
inline bool is_invalid(T v) {
  return std::isnan(v);
}

/// Label value marking pixels with no usable data. Matches the 16-bit
/// PGM sentinel so label maps round-trip through files unchanged.
inline constexpr int kInvalidLabel = 65535;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Angle of the residual rotation between two rotation matrices, radians.
template <typename T>
T rotation_angle_between(const Mat3T<T>& a, const Mat3T<T>& b) {
  const T c = ((a.transpose() * b).trace() - T(1)) / T(2);
  return std::acos(std::min(T(1), std::max(T(-1), c)));
}

/// Unsigned angle between two direction vectors, radians.
template <typename T>
T angle_between(const Vec3T<T>& a, const Vec3T<T>& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Angle between directions treating v and -v as equal, radians.
template <typename T>
T direction_angle_upto_sign(const Vec3T<T>& a, const Vec3T<T>& b) {
  const T ang = angle_between(a, b);
  return std::min(ang, T(kPi) - ang);
}

}  // namespace rigidkit
