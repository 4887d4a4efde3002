#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecvpose/config.hpp"
#include "ecvpose/ecvpose_core.hpp"

namespace ecvpose {
namespace detail {

/// Config file path plus explicit --key overrides, applied in flag order on
/// top of the file (flags win).
struct ConfigCli {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  PipelineConfig resolve() const {
    PipelineConfig cfg =
        config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    cfg.validate();
    return cfg;
  }
};

inline std::shared_ptr<ConfigCli> add_config_flags(CLI::App* cmd) {
  auto state = std::make_shared<ConfigCli>();
  cmd->add_option("--config", state->config_path, "configuration file (key = value lines)");
  for (const char* key : kConfigKeys) {
    const std::string name = std::string("--") + key;
    cmd->add_option_function<std::string>(
        name,
        [state, key](const std::string& value) { state->overrides.emplace_back(key, value); },
        std::string("override configuration key ") + key);
  }
  return state;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct DescribedModel {
  std::vector<Primitive> primitives;
  std::vector<ContextDescriptor> descriptors;
};

inline DescribedModel load_model(const std::string& primitives_path,
                                 const std::string& descriptors_path,
                                 const PipelineConfig& cfg) {
  DescribedModel model;
  model.primitives = load_primitives(primitives_path);
  model.descriptors = descriptors_path.empty()
                          ? build_all_descriptors(model.primitives, cfg.descriptor_params())
                          : load_descriptors(descriptors_path);
  return model;
}

inline RigidTransform parse_pose_values(const std::vector<double>& v) {
  if (v.size() != 7)
    throw Error(ErrorCode::InvalidParameter,
                "--pose takes 7 values: axis(3) angle(rad) translation(3)");
  const Eigen::Vector3d axis(v[0], v[1], v[2]);
  if (axis.norm() < 1e-12)
    throw Error(ErrorCode::InvalidParameter, "--pose axis must be non-zero");
  return RigidTransform::from_axis_angle(axis.normalized(), v[3], {v[4], v[5], v[6]});
}

}  // namespace detail

/// Command-line pipeline front end. `args` excludes the program name. Errors
/// surface as one machine-readable JSON line on `err` and a non-zero exit.
inline int run_pipeline(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
  CLI::App app{"Pose-estimation pipeline: keypoint extraction, context descriptors, "
               "polygon-prefiltered consensus registration"};
  app.require_subcommand(1);

  // ---- extract ----
  auto* extract = app.add_subcommand("extract", "RGB-D frame -> classified 3D primitives");
  auto extract_cfg = detail::add_config_flags(extract);
  auto extract_opts = std::make_shared<std::array<std::string, 3>>();
  extract->add_option("--in", (*extract_opts)[0], "input frame (ECVF)")->required();
  extract->add_option("--out", (*extract_opts)[1], "output primitives (ECVP)")->required();
  extract->add_option("--report", (*extract_opts)[2], "diagnostics report (JSON)");
  extract->callback([extract_cfg, extract_opts] {
    const PipelineConfig cfg = extract_cfg->resolve();
    const detail::Stopwatch watch;
    const RgbdFrame frame = load_frame((*extract_opts)[0]);
    const ExtractResult result = extract_primitives(frame, cfg.extract_params());
    save_primitives((*extract_opts)[1], result.primitives);
    if (!(*extract_opts)[2].empty())
      save_report((*extract_opts)[2],
                  extract_report(result.diagnostics, result.primitives.size(), watch.seconds()));
  });

  // ---- describe ----
  auto* describe = app.add_subcommand("describe", "primitives -> context descriptors");
  auto describe_cfg = detail::add_config_flags(describe);
  auto describe_opts = std::make_shared<std::array<std::string, 3>>();
  describe->add_option("--in", (*describe_opts)[0], "input primitives (ECVP)")->required();
  describe->add_option("--out", (*describe_opts)[1], "output descriptors (ECVD)")->required();
  describe->add_option("--report", (*describe_opts)[2], "diagnostics report (JSON)");
  describe->callback([describe_cfg, describe_opts] {
    const PipelineConfig cfg = describe_cfg->resolve();
    const detail::Stopwatch watch;
    const std::vector<Primitive> primitives = load_primitives((*describe_opts)[0]);
    DescriptorDiagnostics diag;
    const std::vector<ContextDescriptor> descriptors =
        build_all_descriptors(primitives, cfg.descriptor_params(), &diag);
    save_descriptors((*describe_opts)[1], descriptors);
    if (!(*describe_opts)[2].empty())
      save_report((*describe_opts)[2],
                  {{"command", "describe"},
                   {"descriptors", descriptors.size()},
                   {"skipped_insufficient_neighbors", diag.skipped_insufficient_neighbors},
                   {"skipped_coincident_pairs", diag.skipped_coincident_pairs},
                   {"time_s", watch.seconds()}});
  });

  // ---- match ----
  auto* match = app.add_subcommand("match", "nearest-neighbor descriptor correspondences");
  auto match_cfg = detail::add_config_flags(match);
  auto match_opts = std::make_shared<std::array<std::string, 4>>();
  match->add_option("--object", (*match_opts)[0], "object descriptors (ECVD)")->required();
  match->add_option("--scene", (*match_opts)[1], "scene descriptors (ECVD)")->required();
  match->add_option("--out", (*match_opts)[2], "output correspondences (ECVC)")->required();
  match->add_option("--report", (*match_opts)[3], "diagnostics report (JSON)");
  match->callback([match_cfg, match_opts] {
    const PipelineConfig cfg = match_cfg->resolve();
    const detail::Stopwatch watch;
    const std::vector<ContextDescriptor> object = load_descriptors((*match_opts)[0]);
    const std::vector<ContextDescriptor> scene = load_descriptors((*match_opts)[1]);
    const CorrespondenceSet set = match_descriptors(object, scene, cfg.match_params());
    save_correspondences((*match_opts)[2], set);
    if (!(*match_opts)[3].empty())
      save_report((*match_opts)[3], {{"command", "match"},
                                     {"matches", set.entries.size()},
                                     {"omitted_no_candidates", set.omitted_no_candidates},
                                     {"omitted_by_ratio", set.omitted_by_ratio},
                                     {"time_s", watch.seconds()}});
  });

  // ---- register ----
  auto* reg = app.add_subcommand("register", "estimate the object->scene pose by consensus");
  auto reg_cfg = detail::add_config_flags(reg);
  auto reg_opts = std::make_shared<std::array<std::string, 6>>();
  reg->add_option("--object", (*reg_opts)[0], "object primitives (ECVP)")->required();
  reg->add_option("--scene", (*reg_opts)[1], "scene primitives (ECVP)")->required();
  reg->add_option("--object-desc", (*reg_opts)[2], "object descriptors (computed when absent)");
  reg->add_option("--scene-desc", (*reg_opts)[3], "scene descriptors (computed when absent)");
  reg->add_option("--out", (*reg_opts)[4], "output pose (ECVT)");
  reg->add_option("--report", (*reg_opts)[5], "registration report (JSON)");
  reg->callback([reg_cfg, reg_opts] {
    const PipelineConfig cfg = reg_cfg->resolve();
    const detail::DescribedModel object =
        detail::load_model((*reg_opts)[0], (*reg_opts)[2], cfg);
    const detail::DescribedModel scene = detail::load_model((*reg_opts)[1], (*reg_opts)[3], cfg);
    const CorrespondenceSet correspondences =
        match_descriptors(object.descriptors, scene.descriptors, cfg.match_params());
    const RansacResult result =
        ransac_register(primitive_positions(object.primitives),
                        primitive_positions(scene.primitives), correspondences,
                        cfg.ransac_config());
    if (!(*reg_opts)[5].empty()) save_report((*reg_opts)[5], registration_report(result));
    if (!result.success)
      throw Error(ErrorCode::NoConsensus, "no hypothesis reached the inlier quorum");
    if (!(*reg_opts)[4].empty()) save_transform((*reg_opts)[4], result.pose);
  });

  // ---- icp ----
  auto* icp = app.add_subcommand("icp", "refine a pose by iterative closest point");
  auto icp_cfg = detail::add_config_flags(icp);
  auto icp_opts = std::make_shared<std::array<std::string, 5>>();
  icp->add_option("--source", (*icp_opts)[0], "source primitives (ECVP)")->required();
  icp->add_option("--target", (*icp_opts)[1], "target primitives (ECVP)")->required();
  icp->add_option("--init", (*icp_opts)[2], "initial pose (ECVT); identity when absent");
  icp->add_option("--out", (*icp_opts)[3], "output pose (ECVT)");
  icp->add_option("--report", (*icp_opts)[4], "alignment report (JSON)");
  icp->callback([icp_cfg, icp_opts] {
    const PipelineConfig cfg = icp_cfg->resolve();
    const detail::Stopwatch watch;
    const std::vector<Primitive> source = load_primitives((*icp_opts)[0]);
    const std::vector<Primitive> target = load_primitives((*icp_opts)[1]);
    const RigidTransform init = (*icp_opts)[2].empty() ? RigidTransform::identity()
                                                       : load_transform((*icp_opts)[2]);
    const IcpResult result = icp_align(primitive_positions(source),
                                       primitive_positions(target), init, cfg.icp_config());
    if (!(*icp_opts)[3].empty()) save_transform((*icp_opts)[3], result.pose);
    if (!(*icp_opts)[4].empty())
      save_report((*icp_opts)[4], icp_report(result, watch.seconds()));
  });

  // ---- eval-corr ----
  auto* eval = app.add_subcommand("eval-corr", "true-correspondence score of two models");
  auto eval_cfg = detail::add_config_flags(eval);
  auto eval_opts = std::make_shared<std::array<std::string, 3>>();
  eval->add_option("--object", (*eval_opts)[0], "object primitives (ECVP)")->required();
  eval->add_option("--scene", (*eval_opts)[1], "scene primitives (ECVP)")->required();
  eval->add_option("--report", (*eval_opts)[2], "score report (JSON)")->required();
  eval->callback([eval_cfg, eval_opts] {
    const PipelineConfig cfg = eval_cfg->resolve();
    const detail::Stopwatch watch;
    const std::vector<Primitive> object = load_primitives((*eval_opts)[0]);
    const std::vector<Primitive> scene = load_primitives((*eval_opts)[1]);
    const CorrespondenceScore score =
        true_correspondence_score(object, scene, cfg.score_params());
    save_report((*eval_opts)[2], score_report(score, watch.seconds()));
  });

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic RGB-D scene");
  auto synth_cfg = detail::add_config_flags(synth);
  struct SynthOpts {
    std::string preset = "benchmark";
    std::string out, out_b, gt_out;
    std::vector<double> pose_values;
    double depth = 1.0;
    double sigma = -1.0;
    double occlusion = -1.0;
    std::int64_t texture_seed = -1;
    std::int64_t noise_seed = -1;
  };
  auto synth_opts = std::make_shared<SynthOpts>();
  synth->add_option("--preset", synth_opts->preset, "plane | benchmark | twoview")
      ->check(CLI::IsMember({"plane", "benchmark", "twoview"}));
  synth->add_option("--out", synth_opts->out, "output frame (ECVF)")->required();
  synth->add_option("--out-b", synth_opts->out_b, "second-view frame (twoview preset)");
  synth->add_option("--gt-out", synth_opts->gt_out, "ground-truth pose output (ECVT)");
  synth->add_option("--pose", synth_opts->pose_values,
                    "scene pose: axis(3) angle(rad) translation(3)")
      ->expected(7);
  synth->add_option("--depth", synth_opts->depth, "plane preset: plane depth in meters");
  synth->add_option("--sigma", synth_opts->sigma, "depth noise sigma override (meters)");
  synth->add_option("--occlusion", synth_opts->occlusion, "occluded pixel fraction override");
  synth->add_option("--texture-seed", synth_opts->texture_seed, "texture seed override");
  synth->add_option("--noise-seed", synth_opts->noise_seed, "noise seed override");
  synth->callback([synth_cfg, synth_opts] {
    const PipelineConfig cfg = synth_cfg->resolve();
    SceneSpec spec = synth_opts->preset == "plane" ? plane_scene_spec(synth_opts->depth)
                                                   : benchmark_scene_spec();
    if (synth_opts->sigma >= 0.0) spec.noise_sigma = synth_opts->sigma;
    if (synth_opts->occlusion >= 0.0) spec.occlusion_fraction = synth_opts->occlusion;
    if (synth_opts->texture_seed >= 0) spec.texture_seed = std::uint64_t(synth_opts->texture_seed);
    if (synth_opts->noise_seed >= 0) spec.noise_seed = std::uint64_t(synth_opts->noise_seed);

    const int threads = cfg.threads;
    if (synth_opts->preset == "twoview") {
      if (synth_opts->out_b.empty())
        throw Error(ErrorCode::InvalidParameter, "twoview preset needs --out-b");
      const RigidTransform view = synth_opts->pose_values.empty()
                                      ? benchmark_view_pose()
                                      : detail::parse_pose_values(synth_opts->pose_values);
      const SyntheticScene a = generate_scene(spec, RigidTransform::identity(), threads);
      SceneSpec spec_b = spec;
      spec_b.noise_seed = splitmix64(spec.noise_seed + 1);  // independent sensor noise
      const SyntheticScene b = generate_scene(spec_b, view, threads);
      save_frame(synth_opts->out, a.frame);
      save_frame(synth_opts->out_b, b.frame);
      if (!synth_opts->gt_out.empty()) save_transform(synth_opts->gt_out, view);
    } else {
      const RigidTransform pose = synth_opts->pose_values.empty()
                                      ? RigidTransform::identity()
                                      : detail::parse_pose_values(synth_opts->pose_values);
      const SyntheticScene scene = generate_scene(spec, pose, threads);
      save_frame(synth_opts->out, scene.frame);
      if (!synth_opts->gt_out.empty()) save_transform(synth_opts->gt_out, pose);
    }
  });

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "paired prefilter-off/on registration benchmark");
  auto bench_cfg = detail::add_config_flags(bench);
  struct BenchOpts {
    std::string object, scene, object_desc, scene_desc, report;
    int repeats = 20;
  };
  auto bench_opts = std::make_shared<BenchOpts>();
  bench->add_option("--object", bench_opts->object, "object primitives (ECVP)")->required();
  bench->add_option("--scene", bench_opts->scene, "scene primitives (ECVP)")->required();
  bench->add_option("--object-desc", bench_opts->object_desc, "object descriptors");
  bench->add_option("--scene-desc", bench_opts->scene_desc, "scene descriptors");
  bench->add_option("--repeats", bench_opts->repeats, "paired repeats");
  bench->add_option("--report", bench_opts->report, "benchmark report (JSON)")->required();
  bench->callback([bench_cfg, bench_opts] {
    const PipelineConfig cfg = bench_cfg->resolve();
    const detail::DescribedModel object =
        detail::load_model(bench_opts->object, bench_opts->object_desc, cfg);
    const detail::DescribedModel scene =
        detail::load_model(bench_opts->scene, bench_opts->scene_desc, cfg);
    const CorrespondenceSet correspondences =
        match_descriptors(object.descriptors, scene.descriptors, cfg.match_params());
    const BenchmarkReport report = run_registration_benchmark(
        primitive_positions(object.primitives), primitive_positions(scene.primitives),
        correspondences, cfg.ransac_config(), bench_opts->repeats, cfg.seed);
    save_report(bench_opts->report, benchmark_report_json(report));
  });

  // ---- color-calib ----
  auto* calib = app.add_subcommand("color-calib", "estimate the channel mapping from pairs");
  auto calib_cfg = detail::add_config_flags(calib);
  auto calib_opts = std::make_shared<std::array<std::string, 3>>();
  calib->add_option("--pairs", (*calib_opts)[0],
                    "labeled color pairs, six values per line (src rgb, tgt rgb)")
      ->required();
  calib->add_option("--out", (*calib_opts)[1], "output calibration (ECVM)")->required();
  calib->add_option("--report", (*calib_opts)[2], "calibration report (JSON)");
  calib->callback([calib_cfg, calib_opts] {
    const PipelineConfig cfg = calib_cfg->resolve();
    const std::vector<ColorPair> pairs = load_color_pairs((*calib_opts)[0]);
    const ColorCalibration calibration = estimate_color_matrix(pairs, cfg.color_offset);
    save_color_calibration((*calib_opts)[1], calibration);
    if (!(*calib_opts)[2].empty())
      save_report((*calib_opts)[2], {{"command", "color-calib"},
                                     {"pairs", pairs.size()},
                                     {"residual_rms", calibration.residual_rms},
                                     {"condition", calibration.condition},
                                     {"has_offset", calibration.has_offset}});
  });

  // ---- apply-color ----
  auto* apply = app.add_subcommand("apply-color", "remap primitive colors by a calibration");
  auto apply_opts = std::make_shared<std::array<std::string, 3>>();
  apply->add_option("--matrix", (*apply_opts)[0], "calibration (ECVM)")->required();
  apply->add_option("--in", (*apply_opts)[1], "input primitives (ECVP)")->required();
  apply->add_option("--out", (*apply_opts)[2], "output primitives (ECVP)")->required();
  apply->callback([apply_opts] {
    const ColorCalibration calibration = load_color_calibration((*apply_opts)[0]);
    const std::vector<Primitive> primitives = load_primitives((*apply_opts)[1]);
    save_primitives((*apply_opts)[2], apply_color_matrix(calibration, primitives));
  });

  auto emit_error = [&err](const std::string& category, const std::string& message) {
    nlohmann::json j{{"error", category}, {"message", message}};
    err << j.dump() << "\n";
  };

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("ecvpose");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("Usage", e.what());
    return 1;
  } catch (const Error& e) {
    emit_error(error_code_name(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("Internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace ecvpose
