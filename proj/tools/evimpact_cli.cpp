#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evimpact/accumulate.hpp"
#include "evimpact/event_io.hpp"
#include "evimpact/pipeline.hpp"

namespace fs = std::filesystem;
using namespace evimpact;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  std::optional<int> window_frames;
  std::optional<double> lambda_ce, lambda_dice, lambda_smooth, lambda_circ;
  std::vector<double> class_weights;
  std::optional<double> sigma_ms;
};

void add_common(CLI::App *cmd, CommonOpts &opts) {
  cmd->add_option("--config", opts.config_path, "RunConfig JSON file");
  cmd->add_option("--seed", opts.seed, "base RNG seed");
  cmd->add_option("--parallelism", opts.parallelism, "max concurrent clips");
  cmd->add_option("--window-frames", opts.window_frames,
                  "accumulation window length in frames");
  cmd->add_option("--lambda-ce", opts.lambda_ce, "cross-entropy weight");
  cmd->add_option("--lambda-dice", opts.lambda_dice, "dice weight");
  cmd->add_option("--lambda-smooth", opts.lambda_smooth, "smoothness weight");
  cmd->add_option("--lambda-circ", opts.lambda_circ, "circularity weight");
  cmd->add_option("--class-weights", opts.class_weights,
                  "bg,bat,ball cross-entropy class weights")
      ->delimiter(',')
      ->expected(0, 3);
  cmd->add_option("--sigma-ms", opts.sigma_ms, "annotator sigma, ms");
}

pipeline::RunConfig resolve_config(const CommonOpts &opts) {
  pipeline::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = pipeline::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.parallelism) cfg.parallelism = *opts.parallelism;
  if (opts.window_frames) cfg.accum.window_frames = *opts.window_frames;
  if (opts.lambda_ce) cfg.loss.lambda_ce = *opts.lambda_ce;
  if (opts.lambda_dice) cfg.loss.lambda_dice = *opts.lambda_dice;
  if (opts.lambda_smooth) cfg.loss.lambda_smooth = *opts.lambda_smooth;
  if (opts.lambda_circ) cfg.loss.lambda_circ = *opts.lambda_circ;
  if (!opts.class_weights.empty()) {
    if (opts.class_weights.size() != 3)
      throw DomainError("--class-weights expects bg,bat,ball");
    cfg.loss.w_background = opts.class_weights[0];
    cfg.loss.w_bat = opts.class_weights[1];
    cfg.loss.w_ball = opts.class_weights[2];
  }
  if (opts.sigma_ms) cfg.thresholds.sigma_ms = *opts.sigma_ms;
  return cfg;
}

void write_file(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Event-based bat-ball impact timing pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string in_dir, out_dir, out_file, events_csv, evals_file, source = "refined";
  std::string scenario_id = "0";
  int clips = 1, width = 346, height = 260;
  std::vector<std::string> trace_files;
  std::vector<double> gt_ms_list;
  double rate_hz = 1000.0;

  auto *c_sim = app.add_subcommand("simulate", "generate synthetic clips");
  add_common(c_sim, opts);
  c_sim->add_option("--out", out_dir, "output clip root")->required();
  c_sim->add_option("--clips", clips, "number of clips");

  auto *c_acc = app.add_subcommand("accumulate", "events -> dense frame stacks");
  add_common(c_acc, opts);
  c_acc->add_option("--in", in_dir, "clip root (batch mode)");
  c_acc->add_option("--events", events_csv, "single event CSV (file mode)");
  c_acc->add_option("--out", out_file, "output EVF1 path (file mode)");
  c_acc->add_option("--width", width, "sensor width (file mode)");
  c_acc->add_option("--height", height, "sensor height (file mode)");

  auto *c_deg = app.add_subcommand("degrade", "GT masks -> coarse fwd/bwd masks");
  add_common(c_deg, opts);
  c_deg->add_option("--in", in_dir, "clip root")->required();

  auto *c_ref = app.add_subcommand("refine", "fuse and refine coarse masks");
  add_common(c_ref, opts);
  c_ref->add_option("--in", in_dir, "clip root")->required();

  auto *c_est = app.add_subcommand("estimate", "impact timing from masks");
  add_common(c_est, opts);
  c_est->add_option("--in", in_dir, "clip root")->required();
  c_est->add_option("--source", source, "mask source: refined|fused|gt")
      ->check(CLI::IsMember({"refined", "fused", "gt"}));

  auto *c_eval = app.add_subcommand("evaluate", "collect per-clip timing errors");
  add_common(c_eval, opts);
  c_eval->add_option("--in", in_dir, "clip root")->required();
  c_eval->add_option("--out", out_file, "clip_evals.json path")->required();
  c_eval->add_option("--scenario", scenario_id, "scenario id for these clips");

  auto *c_imu = app.add_subcommand("imu-compare", "IMU trigger vs ground truth");
  add_common(c_imu, opts);
  c_imu->add_option("--trace", trace_files, "IMU trace CSV (repeatable)")
      ->required();
  c_imu->add_option("--gt-ms", gt_ms_list, "ground-truth time per trace, ms")
      ->required();
  c_imu->add_option("--rate-hz", rate_hz, "IMU sampling rate");

  auto *c_rep = app.add_subcommand("report", "per-scenario MAE/SR tables");
  add_common(c_rep, opts);
  c_rep->add_option("--evals", evals_file, "clip_evals.json")->required();
  c_rep->add_option("--out", out_dir, "directory for report.csv / report.json");

  CLI11_PARSE(app, argc, argv);

  try {
    const pipeline::RunConfig cfg = resolve_config(opts);

    if (c_sim->parsed()) {
      pipeline::run_batch(clips, cfg.parallelism, [&](int i) {
        char id[16];
        std::snprintf(id, sizeof(id), "clip_%03d", i);
        pipeline::stage_simulate(pipeline::clip_dir(out_dir, i), cfg,
                                 pipeline::clip_seed(cfg.seed, i), id);
      });
    } else if (c_acc->parsed()) {
      if (!events_csv.empty()) {
        if (out_file.empty()) throw DomainError("accumulate: --out required with --events");
        const EventStream stream = read_events_csv(events_csv, width, height);
        write_evf(accumulate(stream, cfg.accum), out_file);
      } else if (!in_dir.empty()) {
        const auto dirs = pipeline::list_clip_dirs(in_dir);
        pipeline::run_batch(int(dirs.size()), cfg.parallelism, [&](int i) {
          pipeline::stage_accumulate(dirs[std::size_t(i)], cfg);
        });
      } else {
        throw DomainError("accumulate: provide --in or --events");
      }
    } else if (c_deg->parsed()) {
      const auto dirs = pipeline::list_clip_dirs(in_dir);
      pipeline::run_batch(int(dirs.size()), cfg.parallelism, [&](int i) {
        pipeline::stage_degrade(dirs[std::size_t(i)], cfg,
                                pipeline::clip_seed(cfg.seed, i));
      });
    } else if (c_ref->parsed()) {
      const auto dirs = pipeline::list_clip_dirs(in_dir);
      pipeline::run_batch(int(dirs.size()), cfg.parallelism, [&](int i) {
        pipeline::stage_refine(dirs[std::size_t(i)], cfg);
      });
    } else if (c_est->parsed()) {
      const auto src = source == "refined" ? pipeline::MaskSource::Refined
                       : source == "fused" ? pipeline::MaskSource::Fused
                                           : pipeline::MaskSource::GroundTruth;
      const auto dirs = pipeline::list_clip_dirs(in_dir);
      pipeline::run_batch(int(dirs.size()), cfg.parallelism, [&](int i) {
        pipeline::stage_estimate(dirs[std::size_t(i)], cfg, src);
      });
    } else if (c_eval->parsed()) {
      std::vector<eval::ClipEval> evals;
      for (const auto &dir : pipeline::list_clip_dirs(in_dir)) {
        const pipeline::ClipMeta meta = pipeline::read_clip_meta(dir);
        if (!meta.has_impact) continue;  // no contact, nothing to score
        const pipeline::ImpactSummary est =
            pipeline::read_impact_json(dir / "impact.json");
        eval::ClipEval e;
        e.clip_id = meta.clip_id;
        e.scenario_id = scenario_id;
        e.t_est_ms = est.t_impact_ms;
        e.t_gt_ms = double(meta.gt_impact_us) / 1000.0;
        evals.push_back(std::move(e));
      }
      pipeline::write_clip_evals(out_file, evals);
      std::printf("wrote %zu clip evals to %s\n", evals.size(), out_file.c_str());
    } else if (c_imu->parsed()) {
      if (trace_files.size() != gt_ms_list.size())
        throw DomainError("imu-compare: one --gt-ms per --trace");
      std::vector<double> lags;
      for (std::size_t i = 0; i < trace_files.size(); ++i) {
        const impact::ImuTrace trace =
            impact::read_imu_csv(trace_files[i], rate_hz);
        const int idx = impact::imu_detect(trace);
        const double t_imu_ms = 1000.0 * double(idx) / trace.rate_hz;
        const double lag = t_imu_ms - gt_ms_list[i];
        lags.push_back(lag);
        std::printf("%s: trigger sample %d (t = %.3f ms), lag %.3f ms\n",
                    trace_files[i].c_str(), idx, t_imu_ms, lag);
      }
      const impact::LatencyStats stats = impact::latency_stats(lags);
      std::printf("latency over %zu traces: mean %.3f ms, std %.3f ms, "
                  "min %.3f ms, max %.3f ms\n",
                  lags.size(), stats.mean, stats.stddev, stats.min, stats.max);
    } else if (c_rep->parsed()) {
      const auto evals = pipeline::read_clip_evals(evals_file);
      const eval::Report rep = eval::report(evals, cfg.thresholds);
      std::fputs(rep.to_csv().c_str(), stdout);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "report.csv", rep.to_csv());
        write_file(fs::path(out_dir) / "report.json", rep.to_json());
      }
    }
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
