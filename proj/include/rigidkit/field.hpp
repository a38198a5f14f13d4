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

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rigidkit/core.hpp"

namespace rigidkit {

enum class FieldKind {
  flow,        // 2ch, pixels
  expansion,   // 1ch, ratio tau = Z1/Z0
  depth,       // 1ch, scene units
  confidence,  // 1ch, [0,1]
  cost,        // 1ch, nonnegative or NaN-invalid
  scene_flow,  // 3ch, normalized units
  points,      // 3ch, scene units
  label,       // 1ch, integer ids (kInvalidLabel = no data)
};

inline int channels_for(FieldKind kind) {
  switch (kind) {
    case FieldKind::flow: return 2;
    case FieldKind::scene_flow:
    case FieldKind::points: return 3;
    default: return 1;
  }
}

/// Row-major raster of width x height x channels scalars.
template <typename T>
class DenseField {
 public:
  DenseField() = default;

  DenseField(int width, int height, FieldKind kind, T fill = T(0))
      : width_(width), height_(height), channels_(channels_for(kind)), kind_(kind),
        data_(static_cast<std::size_t>(width) * height * channels_, fill) {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("DenseField: dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  FieldKind kind() const { return kind_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  T& at(int row, int col, int c = 0) { return data_[index(row, col, c)]; }
  const T& at(int row, int col, int c = 0) const { return data_[index(row, col, c)]; }

  Vec2T<T> vec2(int row, int col) const {
    const std::size_t i = index(row, col, 0);
    return Vec2T<T>(data_[i], data_[i + 1]);
  }
  void set_vec2(int row, int col, const Vec2T<T>& v) {
    const std::size_t i = index(row, col, 0);
    data_[i] = v.x();
    data_[i + 1] = v.y();
  }
  Vec3T<T> vec3(int row, int col) const {
    const std::size_t i = index(row, col, 0);
    return Vec3T<T>(data_[i], data_[i + 1], data_[i + 2]);
  }
  void set_vec3(int row, int col, const Vec3T<T>& v) {
    const std::size_t i = index(row, col, 0);
    data_[i] = v.x();
    data_[i + 1] = v.y();
    data_[i + 2] = v.z();
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  /// Eigen view of one channel over all pixels (expression-friendly).
  Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>, 0, Eigen::InnerStride<>>
  channel(int c) const {
    return {data_.data() + c, static_cast<Eigen::Index>(pixel_count()),
            Eigen::InnerStride<>(channels_)};
  }
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>, 0, Eigen::InnerStride<>> channel(int c) {
    return {data_.data() + c, static_cast<Eigen::Index>(pixel_count()),
            Eigen::InnerStride<>(channels_)};
  }

  template <typename U>
  bool same_dims(const DenseField<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool in_bounds(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= static_cast<double>(width_) &&
           v <= static_cast<double>(height_);
  }

 private:
  std::size_t index(int row, int col, int c) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  FieldKind kind_ = FieldKind::cost;
  std::vector<T> data_;
};

using FieldD = DenseField<double>;
using LabelField = DenseField<int>;

inline void require_same_dims(const FieldD& a, const FieldD& b, const char* what) {
  if (!a.same_dims(b)) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace rigidkit
