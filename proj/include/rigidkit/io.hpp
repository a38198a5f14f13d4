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

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "rigidkit/field.hpp"
#include "rigidkit/geometry.hpp"
#include "rigidkit/simkit.hpp"

namespace rigidkit::io {

// File formats:
//  - .flo  Middlebury optical flow: float tag 202021.25 (little endian),
//          int32 width, int32 height, then row-major interleaved float32 u,v.
//  - .pfm  "Pf" grayscale float raster, negative scale (little endian),
//          float32 rows stored bottom-to-top. NaN marks invalid pixels.
//  - .pgm  16-bit binary "P5", maxval 65535, big-endian samples.
//          0 = background, 1..N = instances, 65535 = invalid.
// Values are stored as float32; doubles are narrowed on write.

void write_flo(const std::filesystem::path& path, const FieldD& flow);
FieldD read_flo(const std::filesystem::path& path);

void write_pfm(const std::filesystem::path& path, const FieldD& field);
FieldD read_pfm(const std::filesystem::path& path, FieldKind kind = FieldKind::depth);

void write_pgm16(const std::filesystem::path& path, const LabelField& labels);
LabelField read_pgm16(const std::filesystem::path& path);

/// One calibration document per frame pair: {"K0": {...}, "K1": {...}} where
/// each entry is {"fx","fy","cx","cy","skew"}.
nlohmann::ordered_json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k0,
                      const CameraIntrinsics& k1);
std::pair<CameraIntrinsics, CameraIntrinsics> read_intrinsics(const std::filesystem::path& path);

nlohmann::ordered_json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);

simkit::SceneDescription scene_from_json(const nlohmann::json& j);
nlohmann::ordered_json scene_to_json(const simkit::SceneDescription& scene);
simkit::SceneDescription read_scene(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace rigidkit::io
