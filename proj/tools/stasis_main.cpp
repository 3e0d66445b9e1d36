// stasis command line: the full pipeline plus each stage as a subcommand.
// Configuration comes from a JSON file (--config) with one block per stage;
// flags override the file. Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stasis/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using stasis::pipeline::PipelineConfig;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_usage(std::FILE* to) {
  std::fputs(
      "usage: stasis <command> [flags]\n"
      "\n"
      "commands\n"
      "  synth     generate a synthetic dataset (--preset name|spec.json, --out dir)\n"
      "  flow      dense optical flow for a frame directory (--in dir, --out dir)\n"
      "  detect    dynamic-object masks for a frame directory (--in dir, --out dir)\n"
      "  inpaint   fill masked regions (--in dir, --masks dir, --out dir)\n"
      "  vo        monocular visual odometry (--in dir, --intrinsics fx,fy,cx,cy,\n"
      "            [--masks dir], --out dir)\n"
      "  eval      APE/RPE between trajectories (--ref file, --est file, [--mode m])\n"
      "  compare   baseline vs processed run metrics (--baseline file, --processed file)\n"
      "  pipeline  run every stage and write a report (--config file)\n"
      "\n"
      "common flags\n"
      "  --config file   JSON config; one block per stage; flags override it\n"
      "  --seed n        global seed; per-stage seeds derive from it by fixed tags\n"
      "  --out dir       output directory\n"
      "  --in dir        input frame directory (PGM sequence)\n"
      "  --pattern p     frame filename pattern (default frame_%06d.pgm)\n"
      "  --fps x         frames per second for synthesized timestamps\n"
      "  --format f      dataset/trajectory format: synth, kitti, tum\n"
      "  --gt file       ground-truth trajectory (pipeline, non-synth datasets)\n"
      "\n"
      "stage parameter flags\n"
      "  flow:         --flow-levels --flow-alpha --flow-iterations\n"
      "  ransac:       --ransac-iterations --ransac-threshold --ransac-samples\n"
      "  segmentation: --mad-k --min-area --morph-radius --vote-window --vote-quorum\n"
      "                --seg-consistency\n"
      "  inpaint:      --max-hops --diffusion-tol --diffusion-iters --consistency\n"
      "  vo:           --max-features --quality --min-distance --vo-ransac-iters\n"
      "                --vo-ransac-thresh --intrinsics fx,fy,cx,cy\n"
      "  eval:         --mode none|se3|sim3 --rpe-delta n --max-diff s\n",
      to);
}

const std::set<std::string>& config_flags() {
  static const std::set<std::string> kFlags = {
      "--config",        "--seed",
      "--out",           "--in",
      "--pattern",       "--fps",
      "--format",        "--gt",
      "--flow-levels",   "--flow-alpha",
      "--flow-iterations", "--ransac-iterations",
      "--ransac-threshold", "--ransac-samples",
      "--mad-k",         "--min-area",
      "--morph-radius",  "--vote-window",
      "--vote-quorum",   "--seg-consistency",
      "--max-hops",
      "--diffusion-tol", "--diffusion-iters",
      "--consistency",   "--max-features",
      "--quality",       "--min-distance",
      "--vo-ransac-iters", "--vo-ransac-thresh",
      "--intrinsics",    "--mode",
      "--rpe-delta",     "--max-diff"};
  return kFlags;
}

using FlagMap = std::map<std::string, std::string>;

FlagMap parse_flags(const std::vector<std::string>& args, const std::set<std::string>& extra) {
  FlagMap out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) throw UsageError("unexpected argument: " + a);
    if (config_flags().count(a) == 0 && extra.count(a) == 0)
      throw UsageError("unknown flag: " + a);
    if (i + 1 >= args.size()) throw UsageError("flag needs a value: " + a);
    out[a] = args[++i];
  }
  return out;
}

const std::string& need(const FlagMap& f, const std::string& flag, const std::string& what) {
  auto it = f.find(flag);
  if (it == f.end()) throw UsageError("missing required flag " + flag + " (" + what + ")");
  return it->second;
}

double parse_double(const std::string& flag, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("flag " + flag + " needs a number, got: " + v);
  }
}

int parse_int(const std::string& flag, const std::string& v) {
  try {
    std::size_t used = 0;
    int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("flag " + flag + " needs an integer, got: " + v);
  }
}

std::uint64_t parse_u64(const std::string& flag, const std::string& v) {
  try {
    std::size_t used = 0;
    unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("flag " + flag + " needs an unsigned integer, got: " + v);
  }
}

stasis::minivo::Intrinsics parse_intrinsics(const std::string& v) {
  stasis::minivo::Intrinsics k;
  char tail = 0;
  if (std::sscanf(v.c_str(), "%lf,%lf,%lf,%lf%c", &k.fx, &k.fy, &k.cx, &k.cy, &tail) != 4)
    throw UsageError("--intrinsics needs fx,fy,cx,cy, got: " + v);
  return k;
}

// Config file first, then flag overrides on top of it.
PipelineConfig effective_config(const FlagMap& f) {
  PipelineConfig cfg;
  if (auto it = f.find("--config"); it != f.end())
    cfg = stasis::pipeline::load_config(it->second);
  auto str = [&](const char* flag, std::string& into) {
    if (auto it = f.find(flag); it != f.end()) into = it->second;
  };
  auto dbl = [&](const char* flag, double& into) {
    if (auto it = f.find(flag); it != f.end()) into = parse_double(flag, it->second);
  };
  auto num = [&](const char* flag, int& into) {
    if (auto it = f.find(flag); it != f.end()) into = parse_int(flag, it->second);
  };
  if (auto it = f.find("--seed"); it != f.end()) {
    cfg.seed = parse_u64("--seed", it->second);
    cfg.has_seed = true;
  }
  str("--out", cfg.out);
  str("--in", cfg.dataset.path);
  str("--pattern", cfg.dataset.pattern);
  str("--format", cfg.dataset.format);
  str("--gt", cfg.dataset.groundtruth);
  dbl("--fps", cfg.dataset.fps);
  num("--flow-levels", cfg.flow_params.levels);
  dbl("--flow-alpha", cfg.flow_params.alpha);
  num("--flow-iterations", cfg.flow_params.iterations);
  num("--ransac-iterations", cfg.ransac_params.iterations);
  dbl("--ransac-threshold", cfg.ransac_params.inlier_threshold);
  num("--ransac-samples", cfg.ransac_params.sample_size);
  dbl("--mad-k", cfg.seg_params.mad_k);
  num("--min-area", cfg.seg_params.min_area);
  num("--morph-radius", cfg.seg_params.morph_radius);
  num("--vote-window", cfg.seg_params.vote_window);
  dbl("--vote-quorum", cfg.seg_params.vote_quorum);
  dbl("--seg-consistency", cfg.seg_params.consistency_thresh);
  num("--max-hops", cfg.inpaint_params.max_hops);
  dbl("--diffusion-tol", cfg.inpaint_params.diffusion_tol);
  num("--diffusion-iters", cfg.inpaint_params.diffusion_max_iters);
  dbl("--consistency", cfg.inpaint_params.consistency_thresh);
  num("--max-features", cfg.vo_params.max_features);
  dbl("--quality", cfg.vo_params.quality_level);
  dbl("--min-distance", cfg.vo_params.min_distance);
  num("--vo-ransac-iters", cfg.vo_params.ransac_iters);
  dbl("--vo-ransac-thresh", cfg.vo_params.ransac_thresh);
  if (auto it = f.find("--intrinsics"); it != f.end()) {
    cfg.intrinsics = parse_intrinsics(it->second);
    cfg.has_intrinsics = true;
  }
  str("--mode", cfg.eval.align);
  num("--rpe-delta", cfg.eval.rpe_delta);
  dbl("--max-diff", cfg.eval.max_diff);
  return cfg;
}

std::vector<stasis::Frame> load_input_frames(const PipelineConfig& cfg) {
  if (cfg.dataset.path.empty())
    throw UsageError("missing required flag --in (input frame directory)");
  return stasis::io::load_sequence(cfg.dataset.path, cfg.dataset.pattern, cfg.dataset.fps);
}

stasis::io::TrajectoryFormat trajectory_format(const PipelineConfig& cfg) {
  return cfg.dataset.format == "kitti" ? stasis::io::TrajectoryFormat::kitti
                                       : stasis::io::TrajectoryFormat::tum;
}

int cmd_synth(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {"--preset"});
  PipelineConfig cfg = effective_config(f);
  std::string which = f.count("--preset") ? f.at("--preset") : cfg.dataset.path;
  if (which.empty()) throw UsageError("missing required flag --preset (name or spec file)");
  stasis::synth::SceneSpec spec;
  if (stasis::pipeline::is_preset_name(which)) {
    spec = stasis::synth::preset(which);
  } else {
    std::vector<std::uint8_t> bytes = stasis::io::detail::read_file_bytes(which);
    nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    stasis::require(!j.is_discarded(), stasis::Errc::parse_error,
                    "scene spec is not valid JSON: " + which);
    spec = j.get<stasis::synth::SceneSpec>();
  }
  if (cfg.has_seed) spec.seed = cfg.seed;
  stasis::synth::SceneData data = stasis::synth::generate_scene(spec);
  stasis::synth::write_scene(cfg.out, spec, data);
  std::printf("wrote %zu frames (%dx%d) to %s\n", data.frames.size(), spec.width, spec.height,
              cfg.out.c_str());
  return 0;
}

int cmd_flow(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {});
  PipelineConfig cfg = effective_config(f);
  std::vector<stasis::Frame> frames = load_input_frames(cfg);
  stasis::require(frames.size() >= 2, stasis::Errc::insufficient_frames,
                  "flow needs at least 2 frames");
  fs::create_directories(cfg.out);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    int idx = static_cast<int>(i);
    stasis::io::write_flow(
        stasis::flow::dense_flow(frames[i], frames[i + 1], cfg.flow_params),
        (fs::path(cfg.out) / stasis::io::frame_filename("fwd_%06d.flo", idx)).string());
    stasis::io::write_flow(
        stasis::flow::dense_flow(frames[i + 1], frames[i], cfg.flow_params),
        (fs::path(cfg.out) / stasis::io::frame_filename("bwd_%06d.flo", idx)).string());
  }
  std::printf("wrote %zu flow pairs to %s\n", frames.size() - 1, cfg.out.c_str());
  return 0;
}

int cmd_detect(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {});
  PipelineConfig cfg = effective_config(f);
  std::vector<stasis::Frame> frames = load_input_frames(cfg);
  stasis::egomotion::RansacParams rp = cfg.ransac_params;
  rp.seed = stasis::derive_seed(cfg.seed, "egomotion");
  stasis::segmentation::DetectionResult det = stasis::segmentation::detect_dynamic_masks_full(
      frames, cfg.flow_params, rp, cfg.seg_params);
  fs::create_directories(cfg.out);
  double fraction = 0.0;
  for (std::size_t i = 0; i < det.masks.size(); ++i) {
    fraction += det.masks[i].fraction();
    stasis::io::store_mask(
        det.masks[i],
        (fs::path(cfg.out) / stasis::io::frame_filename("mask_%06d.pgm", static_cast<int>(i)))
            .string());
  }
  std::printf("wrote %zu masks to %s (mean dynamic fraction %.4f)\n", det.masks.size(),
              cfg.out.c_str(), fraction / static_cast<double>(det.masks.size()));
  return 0;
}

int cmd_inpaint(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {"--masks", "--mask-pattern"});
  PipelineConfig cfg = effective_config(f);
  std::vector<stasis::Frame> frames = load_input_frames(cfg);
  stasis::require(frames.size() >= 2, stasis::Errc::insufficient_frames,
                  "inpaint needs at least 2 frames");
  const std::string& mask_dir = need(f, "--masks", "mask directory");
  std::string mask_pattern = f.count("--mask-pattern") ? f.at("--mask-pattern") : "mask_%06d.pgm";
  std::vector<stasis::Mask> masks;
  for (std::size_t i = 0; i < frames.size(); ++i)
    masks.push_back(stasis::io::load_mask(
        (fs::path(mask_dir) / stasis::io::frame_filename(mask_pattern, static_cast<int>(i)))
            .string()));
  std::vector<stasis::FlowField> fwd, bwd;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    fwd.push_back(stasis::flow::dense_flow(frames[i], frames[i + 1], cfg.flow_params));
    bwd.push_back(stasis::flow::dense_flow(frames[i + 1], frames[i], cfg.flow_params));
  }
  std::vector<stasis::Frame> result =
      stasis::inpaint::inpaint_sequence(frames, masks, fwd, bwd, cfg.inpaint_params);
  stasis::io::store_sequence(result, cfg.out, "frame_%06d.pgm");
  std::printf("wrote %zu inpainted frames to %s\n", result.size(), cfg.out.c_str());
  return 0;
}

int cmd_vo(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {"--masks", "--mask-pattern"});
  PipelineConfig cfg = effective_config(f);
  std::vector<stasis::Frame> frames = load_input_frames(cfg);
  if (!cfg.has_intrinsics)
    throw UsageError("missing required flag --intrinsics fx,fy,cx,cy (or vo.intrinsics in the config)");
  std::vector<stasis::Mask> masks;
  const std::vector<stasis::Mask>* mask_ptr = nullptr;
  if (f.count("--masks")) {
    std::string mask_pattern =
        f.count("--mask-pattern") ? f.at("--mask-pattern") : "mask_%06d.pgm";
    for (std::size_t i = 0; i < frames.size(); ++i)
      masks.push_back(stasis::io::load_mask(
          (fs::path(f.at("--masks")) / stasis::io::frame_filename(mask_pattern, static_cast<int>(i)))
              .string()));
    mask_ptr = &masks;
  }
  std::vector<double> timestamps;
  for (std::size_t i = 0; i < frames.size(); ++i)
    timestamps.push_back(static_cast<double>(i) / cfg.dataset.fps);
  stasis::minivo::VoParams vp = cfg.vo_params;
  vp.seed = stasis::derive_seed(cfg.seed, "vo");
  stasis::minivo::VoResult res =
      stasis::minivo::run_vo(frames, cfg.intrinsics, vp, mask_ptr, &timestamps);
  fs::create_directories(cfg.out);
  stasis::io::store_trajectory(res.trajectory, (fs::path(cfg.out) / "trajectory.txt").string(),
                               stasis::io::TrajectoryFormat::tum);
  stasis::io::detail::write_file_bytes((fs::path(cfg.out) / "vo_log.json").string(),
                                       stasis::minivo::run_log_json(res).dump(2) + "\n");
  int held = 0;
  for (const stasis::minivo::PairLog& p : res.pairs) held += p.held ? 1 : 0;
  std::printf("estimated %zu poses (%d/%zu pairs held), trajectory in %s\n",
              res.trajectory.size(), held, res.pairs.size(), cfg.out.c_str());
  stasis::require(!res.failed, stasis::Errc::no_consensus,
                  "vo flagged failed: most pairs held (trajectory still written)");
  return 0;
}

int cmd_eval(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {"--ref", "--est", "--sequence"});
  PipelineConfig cfg = effective_config(f);
  const std::string& ref_path = need(f, "--ref", "reference trajectory");
  const std::string& est_path = need(f, "--est", "estimated trajectory");
  stasis::io::TrajectoryFormat fmt = trajectory_format(cfg);
  stasis::Trajectory ref = stasis::io::load_trajectory(ref_path, fmt);
  stasis::Trajectory est = stasis::io::load_trajectory(est_path, fmt);
  std::string sequence =
      f.count("--sequence") ? f.at("--sequence") : fs::path(est_path).stem().string();
  stasis::trajeval::Evaluation ape = stasis::trajeval::ape(
      ref, est, stasis::pipeline::parse_align(cfg.eval.align), cfg.eval.max_diff);
  stasis::trajeval::Evaluation rpe = stasis::trajeval::rpe(
      ref, est, cfg.eval.rpe_delta, stasis::trajeval::RpePart::trans, cfg.eval.max_diff);
  std::printf("APE rmse %.6f  (mean %.6f, median %.6f, std %.6f, n %zu)\n", ape.stats.rmse,
              ape.stats.mean, ape.stats.median, ape.stats.std_dev, ape.stats.n);
  std::printf("RPE rmse %.6f  (mean %.6f, median %.6f, std %.6f, n %zu)\n", rpe.stats.rmse,
              rpe.stats.mean, rpe.stats.median, rpe.stats.std_dev, rpe.stats.n);
  if (f.count("--out")) {
    fs::create_directories(cfg.out);
    stasis::trajeval::RunMetrics m{ape.stats, rpe.stats};
    stasis::io::detail::write_file_bytes(
        (fs::path(cfg.out) / (sequence + ".json")).string(),
        stasis::pipeline::run_metrics_json(sequence, m).dump(2) + "\n");
    stasis::trajeval::emit_error_series(ape.series,
                                        (fs::path(cfg.out) / "ape_series.csv").string());
    stasis::trajeval::emit_error_series(rpe.series,
                                        (fs::path(cfg.out) / "rpe_series.csv").string());
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {"--baseline", "--processed", "--sequence"});
  const std::string& base_path = need(f, "--baseline", "baseline run metrics JSON");
  const std::string& proc_path = need(f, "--processed", "processed run metrics JSON");
  auto load = [](const std::string& path) {
    std::vector<std::uint8_t> bytes = stasis::io::detail::read_file_bytes(path);
    nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    stasis::require(!j.is_discarded(), stasis::Errc::parse_error,
                    "run metrics file is not valid JSON: " + path);
    return stasis::pipeline::run_metrics_from_json(j);
  };
  auto [base_seq, base] = load(base_path);
  auto [proc_seq, proc] = load(proc_path);
  std::string sequence = f.count("--sequence") ? f.at("--sequence")
                         : !base_seq.empty()  ? base_seq
                                              : std::string("comparison");
  std::fputs(
      stasis::trajeval::comparison_text(sequence, stasis::trajeval::compare_runs(base, proc))
          .c_str(),
      stdout);
  return 0;
}

int cmd_pipeline(const std::vector<std::string>& args) {
  FlagMap f = parse_flags(args, {});
  PipelineConfig cfg = effective_config(f);
  stasis::pipeline::PipelineReport report = stasis::pipeline::run_pipeline(cfg);
  std::fputs(stasis::pipeline::report_text(report).c_str(), stdout);
  if (report.partial) {
    std::fprintf(stderr, "error: pipeline partial, see %s/report.json\n", cfg.out.c_str());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    print_usage(stderr);
    return 1;
  }
  std::string cmd = args[0];
  std::vector<std::string> rest(args.begin() + 1, args.end());
  try {
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
      print_usage(stdout);
      return 0;
    }
    if (cmd == "synth") return cmd_synth(rest);
    if (cmd == "flow") return cmd_flow(rest);
    if (cmd == "detect") return cmd_detect(rest);
    if (cmd == "inpaint") return cmd_inpaint(rest);
    if (cmd == "vo") return cmd_vo(rest);
    if (cmd == "eval") return cmd_eval(rest);
    if (cmd == "compare") return cmd_compare(rest);
    if (cmd == "pipeline") return cmd_pipeline(rest);
    throw UsageError("unknown command: " + cmd);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    print_usage(stderr);
    return 1;
  } catch (const stasis::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
