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

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "rigidkit/io.hpp"
#include "rigidkit/pipeline.hpp"

namespace {

using rigidkit::pipeline::PipelineConfig;

void add_input_options(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--flow", cfg.flow_path, "optical flow (.flo)")->required();
  cmd->add_option("--expansion", cfg.expansion_path, "optical expansion (.pfm)")->required();
  cmd->add_option("--depth", cfg.depth_path, "depth prior (.pfm)")->required();
  cmd->add_option("--confidence", cfg.confidence_path, "flow confidence (.pfm)")->required();
  cmd->add_option("--intrinsics", cfg.intrinsics_path,
                  "intrinsics document or simulate manifest (.json)")
      ->required();
}

int run(int argc, char** argv) {
  CLI::App app{"rigidkit: two-frame rigid motion segmentation and scene flow"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may appear after the subcommand

  PipelineConfig cfg;
  std::string config_path;
  app.add_option("--seed", cfg.seed, "random seed (default 0)");
  app.add_option("--threads", cfg.threads, "worker cap; results are thread-count independent");
  app.add_option("--config", config_path, "JSON config overriding thresholds/RANSAC defaults");

  // simulate
  auto* sim = app.add_subcommand("simulate", "render a synthetic scene with ground truth");
  std::string scenario, scene_path, sim_out;
  double flow_sigma = -1.0, expansion_sigma = -1.0, outlier_fraction = -1.0;
  std::string prior_model;
  sim->add_option("--scenario", scenario,
                  "general|coplanar|collinear|zero_translation|pure_rotation");
  sim->add_option("--scene", scene_path, "scene description (.json)");
  sim->add_option("-o,--out", sim_out, "output directory")->required();
  sim->add_option("--flow-sigma", flow_sigma, "override flow noise (px)");
  sim->add_option("--expansion-sigma", expansion_sigma, "override log-expansion noise");
  sim->add_option("--outlier-fraction", outlier_fraction, "override outlier fraction");
  sim->add_option("--prior-model", prior_model, "exact|scaled|smooth_ramp|noisy");

  // segment
  auto* seg = app.add_subcommand("segment", "egomotion + cost maps + rigidity segmentation");
  std::string seg_out;
  add_input_options(seg, cfg);
  seg->add_option("-o,--out", seg_out, "output directory")->required();

  // costmaps (debug: no segmentation outputs)
  auto* costs = app.add_subcommand("costmaps", "emit rigidity cost maps only");
  std::string costs_out;
  add_input_options(costs, cfg);
  costs->add_option("-o,--out", costs_out, "output directory")->required();

  // sceneflow
  auto* sf = app.add_subcommand("sceneflow", "per-segment rigid fits + refined depth/flow");
  std::string sf_out;
  add_input_options(sf, cfg);
  sf->add_option("--labels", cfg.labels_path, "segment labels (.pgm)")->required();
  sf->add_option("--trusted-depth", cfg.trusted_depth_path,
                 "trusted first-frame depth (.pfm); enables PnP refinement");
  sf->add_option("-o,--out", sf_out, "output directory")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score predictions against simulator ground truth");
  std::string pred_dir, gt_dir, ev_out;
  ev->add_option("--pred", pred_dir, "prediction directory")->required();
  ev->add_option("--gt", gt_dir, "ground-truth directory (simulate output)")->required();
  ev->add_option("-o,--out", ev_out, "output directory")->required();
  ev->add_option("--disparity-scale", cfg.disparity_scale, "baseline*fx for disparity metrics");

  CLI11_PARSE(app, argc, argv);
  if (!config_path.empty()) rigidkit::pipeline::apply_config_json(cfg, config_path);

  if (sim->parsed()) {
    rigidkit::simkit::SceneDescription scene;
    if (!scenario.empty()) {
      scene = rigidkit::simkit::make_degenerate_scenario(
          rigidkit::simkit::scenario_from_name(scenario), cfg.seed);
    } else if (!scene_path.empty()) {
      scene = rigidkit::io::read_scene(scene_path);
    } else {
      std::fprintf(stderr, "simulate: provide --scenario or --scene\n");
      return 2;
    }
    if (flow_sigma >= 0.0) scene.noise.flow_sigma = flow_sigma;
    if (expansion_sigma >= 0.0) scene.noise.expansion_sigma = expansion_sigma;
    if (outlier_fraction >= 0.0) scene.noise.outlier_fraction = outlier_fraction;
    if (!prior_model.empty()) {
      using rigidkit::simkit::PriorDepthModel;
      if (prior_model == "exact") scene.noise.prior_model = PriorDepthModel::exact;
      else if (prior_model == "scaled") scene.noise.prior_model = PriorDepthModel::scaled;
      else if (prior_model == "smooth_ramp") scene.noise.prior_model = PriorDepthModel::smooth_ramp;
      else if (prior_model == "noisy") scene.noise.prior_model = PriorDepthModel::noisy;
      else {
        std::fprintf(stderr, "simulate: unknown prior model %s\n", prior_model.c_str());
        return 2;
      }
    }
    scene.noise.seed = cfg.seed;
    rigidkit::pipeline::run_simulate(scene, sim_out);
    return 0;
  }

  if (seg->parsed() || costs->parsed()) {
    const auto in = rigidkit::pipeline::load_segment_inputs(cfg);
    const auto out = rigidkit::pipeline::run_segment(in, cfg);
    const std::filesystem::path dir = seg->parsed() ? seg_out : costs_out;
    if (seg->parsed()) {
      rigidkit::pipeline::write_segment_outputs(out, dir);
    } else {
      std::filesystem::create_directories(dir);
      if (out.cost_epi) rigidkit::io::write_pfm(dir / "cost_epi.pfm", *out.cost_epi);
      if (out.cost_hom) rigidkit::io::write_pfm(dir / "cost_hom.pfm", *out.cost_hom);
      if (out.cost_pp3d) rigidkit::io::write_pfm(dir / "cost_pp3d.pfm", *out.cost_pp3d);
      if (out.cost_depth) rigidkit::io::write_pfm(dir / "cost_depth.pfm", *out.cost_depth);
    }
    return 0;
  }

  if (sf->parsed()) {
    const auto in = rigidkit::pipeline::load_segment_inputs(cfg);
    if (cfg.labels_path.empty() || !std::filesystem::exists(cfg.labels_path))
      throw rigidkit::IoError("labels: missing input file " + cfg.labels_path.string());
    const auto labels = rigidkit::io::read_pgm16(cfg.labels_path);
    std::optional<rigidkit::FieldD> trusted;
    if (!cfg.trusted_depth_path.empty()) {
      trusted = rigidkit::io::read_pfm(cfg.trusted_depth_path, rigidkit::FieldKind::depth);
      cfg.refine_pnp = true;
    }
    const auto out = rigidkit::pipeline::run_sceneflow(in, labels, cfg,
                                                       trusted ? &*trusted : nullptr);
    rigidkit::pipeline::write_sceneflow_outputs(out, sf_out);
    return 0;
  }

  if (ev->parsed()) {
    const auto row = rigidkit::pipeline::run_evaluate(pred_dir, gt_dir, cfg.disparity_scale);
    rigidkit::pipeline::write_evaluation(row, ev_out);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rigidkit::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const rigidkit::egomotion::EstimationFailure& e) {
    std::fprintf(stderr, "error: egomotion estimation failed: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
