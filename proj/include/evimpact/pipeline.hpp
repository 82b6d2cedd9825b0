#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "evimpact/eval.hpp"
#include "evimpact/impact.hpp"
#include "evimpact/loss.hpp"
#include "evimpact/refine.hpp"
#include "evimpact/sim.hpp"

namespace evimpact::pipeline {

// Full experiment configuration; every sub-config carries its defaults, so an
// empty JSON document is a valid RunConfig.
struct RunConfig {
  AccumConfig accum;
  sim::SceneConfig scene;
  sim::DegradeConfig degrade;
  refine::RefinerConfig refiner;
  loss::LossWeights loss;
  eval::Thresholds thresholds;
  std::uint64_t seed = 0;
  int parallelism = 1;
};

RunConfig load_config(const std::filesystem::path &path);
RunConfig parse_config(const std::string &json_text);
std::string config_to_json(const RunConfig &cfg);

// Clip directory layout: <root>/clip_NNN/ holding events.csv, gt_masks.prm
// (one-hot), meta.json, frames.evf, coarse_fwd.prm, coarse_bwd.prm,
// fused.prm, refined.prm, refine_meta.json, impact.json.
std::filesystem::path clip_dir(const std::filesystem::path &root, int index);
std::vector<std::filesystem::path> list_clip_dirs(const std::filesystem::path &root);

struct ClipMeta {
  std::string clip_id;
  bool has_impact = false;
  std::int64_t gt_impact_us = 0;
  std::int64_t frame_dt_us = 100;
};

ClipMeta read_clip_meta(const std::filesystem::path &dir);

// Stage operations; each reads its inputs from and writes its outputs to the
// clip directory, so stages are resumable and idempotent.
void stage_simulate(const std::filesystem::path &dir, const RunConfig &cfg,
                    std::uint64_t clip_seed, const std::string &clip_id);
void stage_accumulate(const std::filesystem::path &dir, const RunConfig &cfg);
void stage_degrade(const std::filesystem::path &dir, const RunConfig &cfg,
                   std::uint64_t clip_seed);
void stage_refine(const std::filesystem::path &dir, const RunConfig &cfg);

enum class MaskSource { Refined, Fused, GroundTruth };

void stage_estimate(const std::filesystem::path &dir, const RunConfig &cfg,
                    MaskSource source);

// Impact result serialization (JSON schema with per-frame measurements).
std::string impact_to_json(const impact::ImpactResult &result,
                           const std::string &clip_id);
void write_impact_json(const std::filesystem::path &path,
                       const impact::ImpactResult &result,
                       const std::string &clip_id);

struct ImpactSummary {
  std::string clip_id;
  double t_impact_ms = 0.0;
  int frame_index = 0;
};

ImpactSummary read_impact_json(const std::filesystem::path &path);

// ClipEval list I/O for the evaluate/report stages.
std::vector<eval::ClipEval> read_clip_evals(const std::filesystem::path &path);
void write_clip_evals(const std::filesystem::path &path,
                      std::span<const eval::ClipEval> evals);

// Runs fn(clip_index) for every clip, at most `parallelism` concurrently.
// Results must not depend on the schedule (clips are independent).
void run_batch(int clip_count, int parallelism,
               const std::function<void(int)> &fn);

// Per-clip seed derivation for simulate/degrade.
std::uint64_t clip_seed(std::uint64_t base_seed, int clip_index);

}  // namespace evimpact::pipeline
