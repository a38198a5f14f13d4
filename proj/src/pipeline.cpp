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

#include "rigidkit/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rigidkit/io.hpp"
#include "rigidkit/parallel.hpp"
#include "rigidkit/rng.hpp"

namespace rigidkit::pipeline {
namespace {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("RIGIDKIT_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
  }();
  return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= 1) {
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

FieldD load_named(const std::filesystem::path& path, const char* role, FieldKind kind) {
  if (path.empty() || !std::filesystem::exists(path))
    throw IoError(std::string(role) + ": missing input file " + path.string());
  if (path.extension() == ".flo") return io::read_flo(path);
  return io::read_pfm(path, kind);
}

}  // namespace

void apply_config_json(PipelineConfig& cfg, const std::filesystem::path& config_path) {
  const auto j = io::read_json(config_path);
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    cfg.thresholds.t_epi = t.value("t_epi", cfg.thresholds.t_epi);
    cfg.thresholds.t_hom = t.value("t_hom", cfg.thresholds.t_hom);
    cfg.thresholds.t_pp3d = t.value("t_pp3d", cfg.thresholds.t_pp3d);
    cfg.thresholds.t_depth = t.value("t_depth", cfg.thresholds.t_depth);
    cfg.thresholds.min_instance_area =
        t.value("min_instance_area", cfg.thresholds.min_instance_area);
  }
  if (j.contains("ransac")) {
    const auto& r = j.at("ransac");
    cfg.ransac.iterations = r.value("iterations", cfg.ransac.iterations);
    cfg.ransac.sampson_threshold = r.value("sampson_threshold", cfg.ransac.sampson_threshold);
    cfg.ransac.confidence = r.value("confidence", cfg.ransac.confidence);
    cfg.ransac.degeneracy_ratio = r.value("degeneracy_ratio", cfg.ransac.degeneracy_ratio);
  }
  cfg.max_correspondences = j.value("max_correspondences", cfg.max_correspondences);
  cfg.parallax_min = j.value("parallax_min", cfg.parallax_min);
  cfg.disparity_scale = j.value("disparity_scale", cfg.disparity_scale);
  cfg.refine_pnp = j.value("refine_pnp", cfg.refine_pnp);
}

SegmentInputs load_segment_inputs(const PipelineConfig& cfg) {
  SegmentInputs in;
  in.flow = load_named(cfg.flow_path, "flow", FieldKind::flow);
  in.expansion = load_named(cfg.expansion_path, "expansion", FieldKind::expansion);
  in.z_prior = load_named(cfg.depth_path, "depth", FieldKind::depth);
  in.confidence = load_named(cfg.confidence_path, "confidence", FieldKind::confidence);
  if (cfg.intrinsics_path.empty() || !std::filesystem::exists(cfg.intrinsics_path))
    throw IoError("intrinsics: missing input file " + cfg.intrinsics_path.string());
  std::tie(in.K0, in.K1) = io::read_intrinsics(cfg.intrinsics_path);
  require_same_dims(in.flow, in.expansion, "inputs");
  require_same_dims(in.flow, in.z_prior, "inputs");
  require_same_dims(in.flow, in.confidence, "inputs");
  return in;
}

SegmentInputs inputs_from_sim(const simkit::CorruptedInputs& sim, const CameraIntrinsics& k0,
                              const CameraIntrinsics& k1) {
  return SegmentInputs{sim.flow, sim.expansion, sim.z_prior, sim.confidence, k0, k1};
}

SegmentOutputs run_segment(const SegmentInputs& in, const PipelineConfig& cfg) {
  const auto corr = egomotion::sample_correspondences(in.flow, in.confidence,
                                                      cfg.max_correspondences, cfg.seed);
  egomotion::RansacConfig rcfg = cfg.ransac;
  rcfg.threads = cfg.threads;
  egomotion::EgomotionEstimate ego =
      egomotion::estimate_egomotion_ransac(corr, in.K0, in.K1, rcfg, cfg.seed);
  log_info("egomotion: %zu pairs, degenerate=%d, median residual %.3g", corr.size(),
           ego.degenerate ? 1 : 0, ego.residual_median);

  costmaps::MotionContext ctx(in.K0, in.K1, ego);
  SegmentOutputs out;
  out.ego = std::move(ego);
  out.labels = LabelField(in.flow.width(), in.flow.height(), FieldKind::label, 0);

  out.cost_hom = costmaps::cost_homography(in.flow, ctx, cfg.threads);
  costmaps::mask_low_confidence(*out.cost_hom, in.confidence);

  if (!out.ego.degenerate) {
    out.scene_flow = costmaps::rectified_scene_flow(in.flow, in.expansion, ctx, cfg.threads);
    out.cost_epi = costmaps::cost_epipolar(in.flow, ctx, cfg.threads);
    out.cost_pp3d = costmaps::cost_pp3d(*out.scene_flow, ctx, cfg.threads);
    costmaps::mask_low_confidence(*out.cost_epi, in.confidence);
    costmaps::mask_low_confidence(*out.cost_pp3d, in.confidence);

    FieldD z_flow = costmaps::triangulate_rigid_depth(in.flow, ctx, cfg.threads);
    costmaps::mask_low_confidence(z_flow, in.confidence);
    try {
      out.gamma = costmaps::align_depth_scale(z_flow, in.z_prior, in.confidence);
      out.cost_depth = costmaps::cost_depth_contrast(z_flow, in.z_prior, out.gamma, cfg.threads);
      costmaps::mask_low_confidence(*out.cost_depth, in.confidence);
    } catch (const InsufficientDataError&) {
      log_info("%s", "costmaps: too few valid pixels for depth-scale alignment; "
                     "skipping the depth-contrast cost");
    }
  }

  segment::ThresholdConfig thresholds = cfg.thresholds;
  thresholds.use_hom_instead_of_epi = out.ego.degenerate;
  segment::RigidityCosts costs;
  if (out.ego.degenerate) {
    costs.hom = &*out.cost_hom;
  } else {
    costs.epi = out.cost_epi ? &*out.cost_epi : nullptr;
    costs.pp3d = out.cost_pp3d ? &*out.cost_pp3d : nullptr;
    costs.depth = out.cost_depth ? &*out.cost_depth : nullptr;
  }
  const LabelField moving = segment::segment_moving(costs, thresholds);
  out.labels = segment::connected_components(moving, thresholds.min_instance_area);

  // Pixels with no data at all are marked invalid rather than background.
  // Low-confidence pixels (e.g. occluded) still carry a flow sample and stay
  // background-neutral, per the no-evidence rule.
  for (int i = 0; i < out.labels.height(); ++i)
    for (int j = 0; j < out.labels.width(); ++j)
      if (!std::isfinite(in.flow.at(i, j, 0)) || !std::isfinite(in.flow.at(i, j, 1)))
        out.labels.at(i, j) = kInvalidLabel;

  out.segmentation = segment::build_segmentation(out.labels);
  return out;
}

void write_segment_outputs(const SegmentOutputs& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_pgm16(dir / "labels.pgm", out.labels);
  if (out.cost_epi) io::write_pfm(dir / "cost_epi.pfm", *out.cost_epi);
  if (out.cost_hom) io::write_pfm(dir / "cost_hom.pfm", *out.cost_hom);
  if (out.cost_pp3d) io::write_pfm(dir / "cost_pp3d.pfm", *out.cost_pp3d);
  if (out.cost_depth) io::write_pfm(dir / "cost_depth.pfm", *out.cost_depth);

  nlohmann::ordered_json ego = io::transform_to_json(out.ego.transform);
  ego["degenerate"] = out.ego.degenerate;
  ego["residual_median"] = out.ego.residual_median;
  ego["inliers"] = std::count(out.ego.inlier_mask.begin(), out.ego.inlier_mask.end(), true);
  ego["pairs"] = out.ego.inlier_mask.size();
  if (std::isfinite(out.gamma)) ego["gamma"] = out.gamma;
  io::write_json(dir / "ego.json", ego);
}

SceneFlowOutputs run_sceneflow(const SegmentInputs& in, const LabelField& labels,
                               const PipelineConfig& cfg, const FieldD* trusted_z0) {
  require_same_dims(in.flow, in.z_prior, "run_sceneflow");
  if (!labels.same_dims(in.flow))
    throw std::invalid_argument("run_sceneflow: labels do not match the inputs");

  std::set<int> ids;
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j)
      if (labels.at(i, j) != kInvalidLabel) ids.insert(labels.at(i, j));

  SceneFlowOutputs out;
  std::vector<int> id_list(ids.begin(), ids.end());
  std::vector<rigidfit::RigidBodyFit> fits(id_list.size());
  parallel_for(id_list.size(), cfg.threads, [&](std::size_t k) {
    auto fit = rigidfit::fit_segment(labels, in.flow, in.confidence, in.z_prior, id_list[k],
                                     in.K0, in.K1, mix_seed(cfg.seed, id_list[k]));
    fit.updated = fit.status == rigidfit::FitStatus::ok &&
                  rigidfit::gate_update(fit, cfg.parallax_min);
    if (cfg.refine_pnp && trusted_z0 && fit.updated)
      fit = rigidfit::refine_pnp_lm(fit, *trusted_z0, in.flow, in.confidence, labels, in.K0,
                                    in.K1);
    fits[k] = fit;
  });
  for (std::size_t k = 0; k < id_list.size(); ++k) {
    log_info("rigidfit: segment %d status=%s updated=%d parallax=%.2fpx valid=%.2f scale=%.4g",
             id_list[k], rigidfit::to_string(fits[k].status).c_str(), fits[k].updated ? 1 : 0,
             fits[k].mean_parallax, fits[k].valid_fraction, fits[k].scale);
    out.fits.emplace(id_list[k], fits[k]);
  }

  out.fields = rigidfit::assemble_scene_flow(labels, out.fits, in.z_prior, in.flow, in.expansion,
                                             in.K0, in.K1, cfg.threads);
  return out;
}

void write_sceneflow_outputs(const SceneFlowOutputs& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_pfm(dir / "z0.pfm", out.fields.z0);
  io::write_pfm(dir / "z1.pfm", out.fields.z1);
  io::write_flo(dir / "flow.flo", out.fields.flow_refined);

  nlohmann::ordered_json report = nlohmann::ordered_json::array();
  for (const auto& [id, fit] : out.fits) {
    nlohmann::ordered_json f;
    f["id"] = id;
    f["rotation"] = io::transform_to_json(fit.transform)["rotation"];
    f["translation"] = io::transform_to_json(fit.transform)["translation"];
    f["scale"] = fit.scale;
    f["n_inliers"] = fit.n_inliers;
    f["mean_parallax"] = fit.mean_parallax;
    f["valid_fraction"] = fit.valid_fraction;
    f["updated"] = fit.updated;
    f["status"] = rigidfit::to_string(fit.status);
    f["pnp_diverged"] = fit.pnp_diverged;
    report.push_back(std::move(f));
  }
  io::write_json(dir / "fits.json", report);
}

EvaluationRow run_evaluate(const std::filesystem::path& pred_dir,
                           const std::filesystem::path& gt_dir, double disparity_scale) {
  const auto manifest = io::read_json(gt_dir / "manifest.json");
  const auto& files = manifest.at("files");
  const auto gt_file = [&](const char* key) {
    const auto p = gt_dir / files.at(key).get<std::string>();
    if (!std::filesystem::exists(p)) throw IoError(std::string(key) + ": missing " + p.string());
    return p;
  };

  const LabelField gt_labels = io::read_pgm16(gt_file("gt_labels"));
  const FieldD gt_flow = io::read_flo(gt_file("gt_flow"));
  const FieldD gt_z0 = io::read_pfm(gt_file("gt_z0"), FieldKind::depth);
  const FieldD gt_z1 = io::read_pfm(gt_file("gt_z1"), FieldKind::depth);

  const auto pred_file = [&](const char* name) {
    const auto p = pred_dir / name;
    if (!std::filesystem::exists(p)) throw IoError(std::string(name) + ": missing " + p.string());
    return p;
  };
  const LabelField pred_labels = io::read_pgm16(pred_file("labels.pgm"));
  const FieldD pred_flow = io::read_flo(pred_file("flow.flo"));
  const FieldD pred_z0 = io::read_pfm(pred_file("z0.pfm"), FieldKind::depth);
  const FieldD pred_z1 = io::read_pfm(pred_file("z1.pfm"), FieldKind::depth);

  FieldD validity(gt_labels.width(), gt_labels.height(), FieldKind::confidence, 0.0);
  for (int i = 0; i < gt_labels.height(); ++i)
    for (int j = 0; j < gt_labels.width(); ++j)
      if (gt_labels.at(i, j) != kInvalidLabel) validity.at(i, j) = 1.0;

  EvaluationRow row;
  row.seg = evalkit::score_segmentation(pred_labels, gt_labels);
  row.flow = evalkit::score_flow(pred_flow, gt_flow, pred_z0, pred_z1, gt_z0, gt_z1, validity,
                                 disparity_scale, &gt_labels);
  return row;
}

void write_evaluation(const EvaluationRow& row, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream csv;
    csv << "bg_iou,obj_fmeasure,precision,recall,d1,d2,fl,sf,valid_pixels\n";
    csv << row.seg.bg_iou << "," << row.seg.obj_fmeasure << "," << row.seg.precision << ","
        << row.seg.recall << "," << row.flow.d1 << "," << row.flow.d2 << "," << row.flow.fl
        << "," << row.flow.sf << "," << row.flow.valid_pixels << "\n";
    std::ofstream f(dir / "scores.csv", std::ios::binary);
    if (!f) throw IoError("cannot write scores.csv");
    f << csv.str();
  }
  nlohmann::ordered_json j;
  j["bg_iou"] = row.seg.bg_iou;
  j["obj_fmeasure"] = row.seg.obj_fmeasure;
  j["precision"] = row.seg.precision;
  j["recall"] = row.seg.recall;
  j["d1"] = row.flow.d1;
  j["d2"] = row.flow.d2;
  j["fl"] = row.flow.fl;
  j["sf"] = row.flow.sf;
  j["valid_pixels"] = row.flow.valid_pixels;
  io::write_json(dir / "scores.json", j);
}

void run_simulate(const simkit::SceneDescription& scene, const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  const simkit::GroundTruth gt = simkit::render(scene);
  const simkit::CorruptedInputs inputs = simkit::corrupt(gt, scene.noise);

  io::write_flo(outdir / "flow.flo", inputs.flow);
  io::write_pfm(outdir / "expansion.pfm", inputs.expansion);
  io::write_pfm(outdir / "depth_prior.pfm", inputs.z_prior);
  io::write_pfm(outdir / "confidence.pfm", inputs.confidence);
  io::write_flo(outdir / "gt_flow.flo", gt.flow);
  io::write_pfm(outdir / "gt_z0.pfm", gt.z0);
  io::write_pfm(outdir / "gt_z1.pfm", gt.z1);
  io::write_pgm16(outdir / "gt_labels.pgm", gt.labels);

  nlohmann::ordered_json manifest;
  manifest["width"] = scene.width;
  manifest["height"] = scene.height;
  manifest["intrinsics"]["K0"] = io::intrinsics_to_json(scene.K0);
  manifest["intrinsics"]["K1"] = io::intrinsics_to_json(scene.K1);
  manifest["ego"] = io::transform_to_json(gt.ego);
  auto& bodies = manifest["bodies"] = nlohmann::ordered_json::array();
  for (const auto& body : gt.bodies) {
    nlohmann::ordered_json b = io::transform_to_json(body.frame0_to_frame1);
    b["id"] = body.id;
    b["translation_scale"] = body.translation_scale;
    bodies.push_back(std::move(b));
  }
  manifest["files"] = nlohmann::ordered_json{
      {"flow", "flow.flo"},           {"expansion", "expansion.pfm"},
      {"depth_prior", "depth_prior.pfm"}, {"confidence", "confidence.pfm"},
      {"gt_flow", "gt_flow.flo"},     {"gt_z0", "gt_z0.pfm"},
      {"gt_z1", "gt_z1.pfm"},         {"gt_labels", "gt_labels.pgm"}};
  io::write_json(outdir / "manifest.json", manifest);
}

}  // namespace rigidkit::pipeline
