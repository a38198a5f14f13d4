#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rigidkit/field.hpp"
#include "rigidkit/io.hpp"
#include "rigidkit/rng.hpp"
#include "rigidkit/simkit.hpp"

using namespace rigidkit;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "rigidkit_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("dense field storage and channel views") {
  FieldD flow(4, 3, FieldKind::flow);
  CHECK(flow.channels() == 2);
  flow.set_vec2(1, 2, Vec2(3.0, -4.0));
  CHECK(flow.at(1, 2, 0) == 3.0);
  CHECK(flow.at(1, 2, 1) == -4.0);
  CHECK(flow.channel(0).abs().maxCoeff() == 3.0);
  CHECK(flow.channel(1).minCoeff() == -4.0);
  CHECK(flow.size() == 4u * 3u * 2u);
  CHECK_THROWS_AS(FieldD(0, 3, FieldKind::cost), std::invalid_argument);
}

TEST_CASE(".flo round-trips byte-identically") {
  const auto dir = temp_dir();
  FieldD flow(33, 21, FieldKind::flow);
  Rng rng(1);
  for (double& v : flow.data()) v = rng.uniform(-50.0, 50.0);
  // Values must be f32-representable for a bit-exact double round-trip.
  for (double& v : flow.data()) v = static_cast<float>(v);

  io::write_flo(dir / "a.flo", flow);
  const FieldD back = io::read_flo(dir / "a.flo");
  CHECK(back.width() == flow.width());
  CHECK(back.height() == flow.height());
  CHECK(back.data() == flow.data());

  io::write_flo(dir / "b.flo", back);
  CHECK(slurp(dir / "a.flo") == slurp(dir / "b.flo"));
}

TEST_CASE("PFM round-trips with NaN sentinels preserved") {
  const auto dir = temp_dir();
  FieldD depth(17, 9, FieldKind::depth);
  Rng rng(2);
  for (double& v : depth.data()) v = static_cast<float>(rng.uniform(0.1, 90.0));
  depth.at(3, 5) = invalid_value<double>();
  depth.at(8, 16) = invalid_value<double>();

  io::write_pfm(dir / "a.pfm", depth);
  const FieldD back = io::read_pfm(dir / "a.pfm", FieldKind::depth);
  for (int i = 0; i < depth.height(); ++i)
    for (int j = 0; j < depth.width(); ++j) {
      if (is_invalid(depth.at(i, j))) {
        CHECK(is_invalid(back.at(i, j)));
      } else {
        CHECK(back.at(i, j) == depth.at(i, j));
      }
    }
  io::write_pfm(dir / "b.pfm", back);
  CHECK(slurp(dir / "a.pfm") == slurp(dir / "b.pfm"));
}

TEST_CASE("16-bit PGM round-trips labels and the invalid sentinel") {
  const auto dir = temp_dir();
  LabelField labels(13, 7, FieldKind::label, 0);
  labels.at(0, 0) = 1;
  labels.at(6, 12) = 513;
  labels.at(3, 3) = kInvalidLabel;
  io::write_pgm16(dir / "a.pgm", labels);
  const LabelField back = io::read_pgm16(dir / "a.pgm");
  CHECK(back.data() == labels.data());
  io::write_pgm16(dir / "b.pgm", back);
  CHECK(slurp(dir / "a.pgm") == slurp(dir / "b.pgm"));
}

TEST_CASE("intrinsics JSON round-trip and manifest acceptance") {
  const auto dir = temp_dir();
  const CameraIntrinsics k0(321.5, 322.25, 161.0, 119.5, 0.25);
  const CameraIntrinsics k1(400.0, 401.0, 200.0, 150.0);
  io::write_intrinsics(dir / "intrinsics.json", k0, k1);
  const auto [a, b] = io::read_intrinsics(dir / "intrinsics.json");
  CHECK(a.fx == k0.fx);
  CHECK(a.skew == k0.skew);
  CHECK(b.cy == k1.cy);
}

TEST_CASE("scene description JSON round-trip") {
  using namespace rigidkit::simkit;
  const SceneDescription scene = make_degenerate_scenario(ScenarioKind::general, 3);
  const auto j = io::scene_to_json(scene);
  const SceneDescription back = io::scene_from_json(j);
  CHECK(back.width == scene.width);
  CHECK(back.bodies.size() == scene.bodies.size());
  CHECK((back.camera_motion.R - scene.camera_motion.R).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((back.camera_motion.T_vec - scene.camera_motion.T_vec).norm() < 1e-15);
  const auto gt_a = render(scene);
  const auto gt_b = render(back);
  CHECK(gt_a.flow.data() == gt_b.flow.data());
}

TEST_CASE("readers reject malformed files") {
  const auto dir = temp_dir();
  {
    std::ofstream f(dir / "bad.flo", std::ios::binary);
    f << "not a flow file";
  }
  CHECK_THROWS_AS(io::read_flo(dir / "bad.flo"), IoError);
  CHECK_THROWS_AS(io::read_pfm(dir / "missing.pfm", FieldKind::depth), IoError);
  CHECK_THROWS_AS(io::read_pgm16(dir / "missing.pgm"), IoError);
}
