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

#include "rigidkit/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "rigidkit/errors.hpp"

namespace rigidkit::io {
namespace {

constexpr float kFloTag = 202021.25f;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  return f;
}

float narrow(double v) { return static_cast<float>(v); }

}  // namespace

void write_flo(const std::filesystem::path& path, const FieldD& flow) {
  if (flow.channels() != 2) throw std::invalid_argument("write_flo: flow must have 2 channels");
  auto f = open_out(path);
  const std::int32_t w = flow.width(), h = flow.height();
  f.write(reinterpret_cast<const char*>(&kFloTag), 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(static_cast<std::size_t>(w) * 2);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      row[2 * j] = narrow(flow.at(i, j, 0));
      row[2 * j + 1] = narrow(flow.at(i, j, 1));
    }
    f.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
  if (!f) throw IoError("write failed: " + path.string());
}

FieldD read_flo(const std::filesystem::path& path) {
  auto f = open_in(path);
  float tag = 0;
  std::int32_t w = 0, h = 0;
  f.read(reinterpret_cast<char*>(&tag), 4);
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  if (!f || tag != kFloTag || w <= 0 || h <= 0)
    throw IoError("not a .flo file: " + path.string());
  FieldD flow(w, h, FieldKind::flow);
  std::vector<float> row(static_cast<std::size_t>(w) * 2);
  for (int i = 0; i < h; ++i) {
    f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!f) throw IoError("truncated .flo file: " + path.string());
    for (int j = 0; j < w; ++j) {
      flow.at(i, j, 0) = row[2 * j];
      flow.at(i, j, 1) = row[2 * j + 1];
    }
  }
  return flow;
}

void write_pfm(const std::filesystem::path& path, const FieldD& field) {
  if (field.channels() != 1) throw std::invalid_argument("write_pfm: single-channel only");
  auto f = open_out(path);
  f << "Pf\n" << field.width() << " " << field.height() << "\n-1.0\n";
  std::vector<float> row(field.width());
  for (int i = field.height() - 1; i >= 0; --i) {  // bottom-to-top
    for (int j = 0; j < field.width(); ++j) row[j] = narrow(field.at(i, j));
    f.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
  if (!f) throw IoError("write failed: " + path.string());
}

FieldD read_pfm(const std::filesystem::path& path, FieldKind kind) {
  auto f = open_in(path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  f >> magic >> w >> h >> scale;
  if (!f || magic != "Pf" || w <= 0 || h <= 0)
    throw IoError("not a grayscale PFM file: " + path.string());
  if (scale >= 0) throw IoError("big-endian PFM unsupported: " + path.string());
  f.get();  // single whitespace after the header
  FieldD field(w, h, kind);
  std::vector<float> row(w);
  for (int i = h - 1; i >= 0; --i) {
    f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!f) throw IoError("truncated PFM file: " + path.string());
    for (int j = 0; j < w; ++j) field.at(i, j) = row[j];
  }
  return field;
}

void write_pgm16(const std::filesystem::path& path, const LabelField& labels) {
  auto f = open_out(path);
  f << "P5\n" << labels.width() << " " << labels.height() << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(labels.width()) * 2);
  for (int i = 0; i < labels.height(); ++i) {
    for (int j = 0; j < labels.width(); ++j) {
      const int v = labels.at(i, j);
      if (v < 0 || v > 65535)
        throw std::invalid_argument("write_pgm16: label out of 16-bit range");
      row[2 * j] = static_cast<unsigned char>(v >> 8);  // big-endian
      row[2 * j + 1] = static_cast<unsigned char>(v & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) throw IoError("write failed: " + path.string());
}

LabelField read_pgm16(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (!f || magic != "P5" || w <= 0 || h <= 0 || maxval != 65535)
    throw IoError("not a 16-bit PGM file: " + path.string());
  f.get();
  LabelField labels(w, h, FieldKind::label);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 2);
  for (int i = 0; i < h; ++i) {
    f.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!f) throw IoError("truncated PGM file: " + path.string());
    for (int j = 0; j < w; ++j)
      labels.at(i, j) = (static_cast<int>(row[2 * j]) << 8) | row[2 * j + 1];
  }
  return labels;
}

nlohmann::ordered_json intrinsics_to_json(const CameraIntrinsics& k) {
  return nlohmann::ordered_json{
      {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"skew", k.skew}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  return CameraIntrinsics(j.at("fx").get<double>(), j.at("fy").get<double>(),
                          j.at("cx").get<double>(), j.at("cy").get<double>(),
                          j.value("skew", 0.0));
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k0,
                      const CameraIntrinsics& k1) {
  nlohmann::ordered_json j;
  j["K0"] = intrinsics_to_json(k0);
  j["K1"] = intrinsics_to_json(k1);
  write_json(path, j);
}

std::pair<CameraIntrinsics, CameraIntrinsics> read_intrinsics(const std::filesystem::path& path) {
  const auto j = read_json(path);
  // Accept either a bare calibration document or a simulate manifest.
  const auto& doc = j.contains("intrinsics") ? j.at("intrinsics") : j;
  return {intrinsics_from_json(doc.at("K0")), intrinsics_from_json(doc.at("K1"))};
}

nlohmann::ordered_json transform_to_json(const RigidTransform& t) {
  nlohmann::ordered_json j;
  auto& r = j["rotation"] = nlohmann::ordered_json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(t.R(i, k));
  j["translation"] = {t.T_vec.x(), t.T_vec.y(), t.T_vec.z()};
  return j;
}

RigidTransform transform_from_json(const nlohmann::json& j) {
  Vec3 t = Vec3::Zero();
  if (j.contains("translation")) {
    const auto& tv = j.at("translation");
    t = Vec3(tv.at(0).get<double>(), tv.at(1).get<double>(), tv.at(2).get<double>());
  }
  if (j.contains("quaternion")) {
    const auto& q = j.at("quaternion");  // [w, x, y, z]
    return RigidTransform::from_quaternion(q.at(0).get<double>(), q.at(1).get<double>(),
                                           q.at(2).get<double>(), q.at(3).get<double>(), t);
  }
  if (j.contains("axis")) {
    const auto& a = j.at("axis");
    return RigidTransform::from_axis_angle(
        Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()),
        deg2rad(j.at("angle_deg").get<double>()), t);
  }
  Mat3 r = Mat3::Identity();
  if (j.contains("rotation")) {
    const auto& rv = j.at("rotation");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) r(i, k) = rv.at(3 * i + k).get<double>();
  }
  return RigidTransform(r, t);
}

namespace {

simkit::Primitive primitive_from_json(const nlohmann::json& j) {
  const auto vec3 = [](const nlohmann::json& v) {
    return Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
  };
  const std::string type = j.at("type").get<std::string>();
  if (type == "patch")
    return simkit::PlanarPatch{vec3(j.at("origin")), vec3(j.at("e1")), vec3(j.at("e2"))};
  if (type == "box") {
    simkit::BoxBody box{vec3(j.at("center")), vec3(j.at("half_extent"))};
    if (j.contains("orient")) {
      const auto& rv = j.at("orient");
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) box.orient(i, k) = rv.at(3 * i + k).get<double>();
    }
    return box;
  }
  if (type == "sphere")
    return simkit::SphereBody{vec3(j.at("center")), j.at("radius").get<double>()};
  if (type == "heightfield")
    return simkit::HeightFieldPatch{vec3(j.at("origin")), vec3(j.at("e1")), vec3(j.at("e2")),
                                    j.value("amplitude", 0.0), j.value("cycles_a", 1.0),
                                    j.value("cycles_b", 1.0)};
  throw IoError("unknown geometry type: " + type);
}

nlohmann::ordered_json primitive_to_json(const simkit::Primitive& prim) {
  const auto arr = [](const Vec3& v) {
    return nlohmann::ordered_json::array({v.x(), v.y(), v.z()});
  };
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, simkit::PlanarPatch>) {
          j["type"] = "patch";
          j["origin"] = arr(g.origin);
          j["e1"] = arr(g.e1);
          j["e2"] = arr(g.e2);
        } else if constexpr (std::is_same_v<G, simkit::BoxBody>) {
          j["type"] = "box";
          j["center"] = arr(g.center);
          j["half_extent"] = arr(g.half_extent);
          auto& rv = j["orient"] = nlohmann::ordered_json::array();
          for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) rv.push_back(g.orient(i, k));
        } else if constexpr (std::is_same_v<G, simkit::SphereBody>) {
          j["type"] = "sphere";
          j["center"] = arr(g.center);
          j["radius"] = g.radius;
        } else {
          j["type"] = "heightfield";
          j["origin"] = arr(g.origin);
          j["e1"] = arr(g.e1);
          j["e2"] = arr(g.e2);
          j["amplitude"] = g.amplitude;
          j["cycles_a"] = g.cycles_a;
          j["cycles_b"] = g.cycles_b;
        }
      },
      prim);
  return j;
}

simkit::PriorDepthModel prior_model_from_name(const std::string& name) {
  if (name == "exact") return simkit::PriorDepthModel::exact;
  if (name == "scaled") return simkit::PriorDepthModel::scaled;
  if (name == "smooth_ramp") return simkit::PriorDepthModel::smooth_ramp;
  if (name == "noisy") return simkit::PriorDepthModel::noisy;
  throw IoError("unknown prior_depth_model: " + name);
}

std::string prior_model_name(simkit::PriorDepthModel m) {
  switch (m) {
    case simkit::PriorDepthModel::exact: return "exact";
    case simkit::PriorDepthModel::scaled: return "scaled";
    case simkit::PriorDepthModel::smooth_ramp: return "smooth_ramp";
    case simkit::PriorDepthModel::noisy: return "noisy";
  }
  return "exact";
}

}  // namespace

simkit::SceneDescription scene_from_json(const nlohmann::json& j) {
  simkit::SceneDescription scene;
  scene.width = j.at("width").get<int>();
  scene.height = j.at("height").get<int>();
  scene.K0 = intrinsics_from_json(j.at("K0"));
  scene.K1 = j.contains("K1") ? intrinsics_from_json(j.at("K1")) : scene.K0;
  scene.camera_motion = transform_from_json(j.at("camera_motion"));
  for (const auto& g : j.value("background", nlohmann::json::array()))
    scene.bodies.push_back(simkit::Body{0, primitive_from_json(g)});
  for (const auto& b : j.value("bodies", nlohmann::json::array())) {
    simkit::Body body;
    body.id = b.at("id").get<int>();
    if (body.id <= 0) throw IoError("mover body ids must be positive");
    body.geometry = primitive_from_json(b.at("geometry"));
    body.motion = transform_from_json(b.at("motion"));
    scene.bodies.push_back(std::move(body));
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    scene.noise.flow_sigma = n.value("flow_sigma", 0.0);
    scene.noise.expansion_sigma = n.value("expansion_sigma", 0.0);
    scene.noise.prior_model = prior_model_from_name(n.value("prior_depth_model", "exact"));
    scene.noise.prior_scale = n.value("prior_scale", 1.0);
    if (n.contains("prior_ramp")) {
      scene.noise.prior_ramp_lo = n.at("prior_ramp").at(0).get<double>();
      scene.noise.prior_ramp_hi = n.at("prior_ramp").at(1).get<double>();
    }
    scene.noise.prior_sigma_log = n.value("prior_sigma_log", 0.0);
    scene.noise.outlier_fraction = n.value("outlier_fraction", 0.0);
    scene.noise.seed = n.value("seed", std::uint64_t{0});
  }
  return scene;
}

nlohmann::ordered_json scene_to_json(const simkit::SceneDescription& scene) {
  nlohmann::ordered_json j;
  j["width"] = scene.width;
  j["height"] = scene.height;
  j["K0"] = intrinsics_to_json(scene.K0);
  j["K1"] = intrinsics_to_json(scene.K1);
  j["camera_motion"] = transform_to_json(scene.camera_motion);
  auto& bg = j["background"] = nlohmann::ordered_json::array();
  auto& bodies = j["bodies"] = nlohmann::ordered_json::array();
  for (const auto& body : scene.bodies) {
    if (body.id == 0) {
      bg.push_back(primitive_to_json(body.geometry));
    } else {
      nlohmann::ordered_json b;
      b["id"] = body.id;
      b["geometry"] = primitive_to_json(body.geometry);
      b["motion"] = transform_to_json(body.motion);
      bodies.push_back(std::move(b));
    }
  }
  nlohmann::ordered_json n;
  n["flow_sigma"] = scene.noise.flow_sigma;
  n["expansion_sigma"] = scene.noise.expansion_sigma;
  n["prior_depth_model"] = prior_model_name(scene.noise.prior_model);
  n["prior_scale"] = scene.noise.prior_scale;
  n["prior_ramp"] = {scene.noise.prior_ramp_lo, scene.noise.prior_ramp_hi};
  n["prior_sigma_log"] = scene.noise.prior_sigma_log;
  n["outlier_fraction"] = scene.noise.outlier_fraction;
  n["seed"] = scene.noise.seed;
  j["noise"] = std::move(n);
  return j;
}

simkit::SceneDescription read_scene(const std::filesystem::path& path) {
  return scene_from_json(read_json(path));
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  auto f = open_out(path);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto f = open_in(path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace rigidkit::io
