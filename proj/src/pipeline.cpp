#include "evimpact/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "evimpact/accumulate.hpp"
#include "evimpact/event_io.hpp"

namespace evimpact::pipeline {
namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FormatError("write failed: " + path.string());
}

template <typename T>
void maybe(const json &j, const char *key, T &field) {
  if (j.contains(key)) field = j.at(key).template get<T>();
}

void parse_vec2(const json &j, const char *key, sim::Vec2 &v) {
  if (!j.contains(key)) return;
  const auto &a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw ParseError(std::string("config: '") + key + "' must be [x, y]");
  v.x = a[0].get<double>();
  v.y = a[1].get<double>();
}

}  // namespace

RunConfig parse_config(const std::string &json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  maybe(j, "seed", cfg.seed);
  maybe(j, "parallelism", cfg.parallelism);
  if (cfg.parallelism < 1) throw DomainError("config: parallelism must be >= 1");
  if (j.contains("accum")) {
    const auto &a = j.at("accum");
    maybe(a, "dt_us", cfg.accum.dt_us);
    maybe(a, "window_frames", cfg.accum.window_frames);
    maybe(a, "saturation", cfg.accum.saturation);
  }
  if (j.contains("scene")) {
    const auto &s = j.at("scene");
    maybe(s, "width", cfg.scene.width);
    maybe(s, "height", cfg.scene.height);
    maybe(s, "ball_radius", cfg.scene.ball_radius);
    maybe(s, "ball_speed", cfg.scene.ball_speed);
    parse_vec2(s, "ball_start", cfg.scene.ball_start);
    parse_vec2(s, "ball_dir", cfg.scene.ball_dir);
    parse_vec2(s, "bat_pivot", cfg.scene.bat_pivot);
    maybe(s, "bat_length", cfg.scene.bat_length);
    maybe(s, "bat_half_width", cfg.scene.bat_half_width);
    maybe(s, "bat_angle0", cfg.scene.bat_angle0);
    maybe(s, "bat_omega", cfg.scene.bat_omega);
    maybe(s, "bat_alpha", cfg.scene.bat_alpha);
    maybe(s, "restitution", cfg.scene.restitution);
    maybe(s, "noise_rate", cfg.scene.noise_rate);
    maybe(s, "micro_step_us", cfg.scene.micro_step_us);
    maybe(s, "clip_duration_us", cfg.scene.clip_duration_us);
  }
  if (j.contains("degrade")) {
    const auto &d = j.at("degrade");
    maybe(d, "jitter_sigma", cfg.degrade.jitter_sigma);
    maybe(d, "dropout_prob", cfg.degrade.dropout_prob);
    maybe(d, "morph_range", cfg.degrade.morph_range);
    maybe(d, "blur_radius", cfg.degrade.blur_radius);
    maybe(d, "merge_window", cfg.degrade.merge_window);
    maybe(d, "merge_dilate", cfg.degrade.merge_dilate);
  }
  if (j.contains("refiner")) {
    const auto &r = j.at("refiner");
    maybe(r, "lambda_fid", cfg.refiner.lambda_fid);
    maybe(r, "step", cfg.refiner.step);
    maybe(r, "max_iters", cfg.refiner.max_iters);
    maybe(r, "rel_tol", cfg.refiner.rel_tol);
    maybe(r, "mass_tau", cfg.refiner.mass_tau);
  }
  if (j.contains("loss")) {
    const auto &l = j.at("loss");
    maybe(l, "lambda_ce", cfg.loss.lambda_ce);
    maybe(l, "lambda_dice", cfg.loss.lambda_dice);
    maybe(l, "lambda_smooth", cfg.loss.lambda_smooth);
    maybe(l, "lambda_circ", cfg.loss.lambda_circ);
    if (l.contains("class_weights")) {
      const auto &w = l.at("class_weights");
      if (!w.is_array() || w.size() != 3)
        throw ParseError("config: loss.class_weights must be [bg, bat, ball]");
      cfg.loss.w_background = w[0].get<double>();
      cfg.loss.w_bat = w[1].get<double>();
      cfg.loss.w_ball = w[2].get<double>();
    }
    maybe(l, "eps_circ", cfg.loss.eps_circ);
    maybe(l, "eps_log", cfg.loss.eps_log);
    maybe(l, "dice_smooth", cfg.loss.dice_smooth);
    maybe(l, "eps_grad", cfg.loss.eps_grad);
  }
  if (j.contains("thresholds")) {
    const auto &t = j.at("thresholds");
    maybe(t, "sigma_ms", cfg.thresholds.sigma_ms);
    maybe(t, "multiples", cfg.thresholds.multiples);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path &path) {
  return parse_config(read_text(path));
}

std::string config_to_json(const RunConfig &cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["parallelism"] = cfg.parallelism;
  j["accum"] = {{"dt_us", cfg.accum.dt_us},
                {"window_frames", cfg.accum.window_frames},
                {"saturation", cfg.accum.saturation}};
  j["scene"] = {{"width", cfg.scene.width},
                {"height", cfg.scene.height},
                {"ball_radius", cfg.scene.ball_radius},
                {"ball_speed", cfg.scene.ball_speed},
                {"ball_start", {cfg.scene.ball_start.x, cfg.scene.ball_start.y}},
                {"ball_dir", {cfg.scene.ball_dir.x, cfg.scene.ball_dir.y}},
                {"bat_pivot", {cfg.scene.bat_pivot.x, cfg.scene.bat_pivot.y}},
                {"bat_length", cfg.scene.bat_length},
                {"bat_half_width", cfg.scene.bat_half_width},
                {"bat_angle0", cfg.scene.bat_angle0},
                {"bat_omega", cfg.scene.bat_omega},
                {"bat_alpha", cfg.scene.bat_alpha},
                {"restitution", cfg.scene.restitution},
                {"noise_rate", cfg.scene.noise_rate},
                {"micro_step_us", cfg.scene.micro_step_us},
                {"clip_duration_us", cfg.scene.clip_duration_us}};
  j["degrade"] = {{"jitter_sigma", cfg.degrade.jitter_sigma},
                  {"dropout_prob", cfg.degrade.dropout_prob},
                  {"morph_range", cfg.degrade.morph_range},
                  {"blur_radius", cfg.degrade.blur_radius},
                  {"merge_window", cfg.degrade.merge_window},
                  {"merge_dilate", cfg.degrade.merge_dilate}};
  j["refiner"] = {{"lambda_fid", cfg.refiner.lambda_fid},
                  {"step", cfg.refiner.step},
                  {"max_iters", cfg.refiner.max_iters},
                  {"rel_tol", cfg.refiner.rel_tol},
                  {"mass_tau", cfg.refiner.mass_tau}};
  j["loss"] = {{"lambda_ce", cfg.loss.lambda_ce},
               {"lambda_dice", cfg.loss.lambda_dice},
               {"lambda_smooth", cfg.loss.lambda_smooth},
               {"lambda_circ", cfg.loss.lambda_circ},
               {"class_weights",
                {cfg.loss.w_background, cfg.loss.w_bat, cfg.loss.w_ball}},
               {"eps_circ", cfg.loss.eps_circ},
               {"eps_log", cfg.loss.eps_log},
               {"dice_smooth", cfg.loss.dice_smooth},
               {"eps_grad", cfg.loss.eps_grad}};
  j["thresholds"] = {{"sigma_ms", cfg.thresholds.sigma_ms},
                     {"multiples", cfg.thresholds.multiples}};
  return j.dump(2);
}

std::filesystem::path clip_dir(const std::filesystem::path &root, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "clip_%03d", index);
  return root / buf;
}

std::vector<std::filesystem::path> list_clip_dirs(
    const std::filesystem::path &root) {
  std::vector<std::filesystem::path> dirs;
  if (!std::filesystem::is_directory(root))
    throw ParseError("not a directory: " + root.string());
  for (const auto &entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory() &&
        entry.path().filename().string().starts_with("clip_"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

ClipMeta read_clip_meta(const std::filesystem::path &dir) {
  const json j = json::parse(read_text(dir / "meta.json"));
  ClipMeta meta;
  meta.clip_id = j.at("clip_id").get<std::string>();
  meta.frame_dt_us = j.at("frame_dt_us").get<std::int64_t>();
  if (!j.at("gt_impact_us").is_null()) {
    meta.has_impact = true;
    meta.gt_impact_us = j.at("gt_impact_us").get<std::int64_t>();
  }
  return meta;
}

void stage_simulate(const std::filesystem::path &dir, const RunConfig &cfg,
                    std::uint64_t seed, const std::string &clip_id) {
  std::filesystem::create_directories(dir);
  sim::SceneConfig scene = cfg.scene;
  scene.seed = seed;
  const sim::ClipBundle bundle = sim::simulate_clip(scene, cfg.accum.dt_us);
  write_events_csv(bundle.stream, dir / "events.csv");
  write_prm(labels_to_onehot(bundle.gt_masks), dir / "gt_masks.prm");
  json meta;
  meta["clip_id"] = clip_id;
  meta["frame_dt_us"] = bundle.frame_dt_us;
  if (bundle.gt_impact_us)
    meta["gt_impact_us"] = *bundle.gt_impact_us;
  else
    meta["gt_impact_us"] = nullptr;
  meta["config"] = json::parse(config_to_json(cfg))["scene"];
  meta["config"]["seed"] = seed;
  write_text(dir / "meta.json", meta.dump(2));
}

void stage_accumulate(const std::filesystem::path &dir, const RunConfig &cfg) {
  const EventStream stream =
      read_events_csv(dir / "events.csv", cfg.scene.width, cfg.scene.height);
  write_evf(accumulate(stream, cfg.accum), dir / "frames.evf");
}

void stage_degrade(const std::filesystem::path &dir, const RunConfig &cfg,
                   std::uint64_t seed) {
  const ClipMeta meta = read_clip_meta(dir);
  const LabelStack gt = onehot_to_labels(read_prm(dir / "gt_masks.prm"));
  std::optional<std::int64_t> impact_us;
  if (meta.has_impact) impact_us = meta.gt_impact_us;
  sim::DegradeConfig dcfg = cfg.degrade;
  dcfg.seed = seed;
  write_prm(sim::degrade_coarse(gt, impact_us, meta.frame_dt_us, dcfg,
                                sim::Direction::Forward),
            dir / "coarse_fwd.prm");
  write_prm(sim::degrade_coarse(gt, impact_us, meta.frame_dt_us, dcfg,
                                sim::Direction::Backward),
            dir / "coarse_bwd.prm");
}

void stage_refine(const std::filesystem::path &dir, const RunConfig &cfg) {
  const PlaneStack fwd = read_prm(dir / "coarse_fwd.prm");
  const PlaneStack bwd = read_prm(dir / "coarse_bwd.prm");
  const refine::FusedClip fused =
      refine::fuse_bidirectional(fwd, bwd, cfg.refiner.mass_tau);
  write_prm(fused.q, dir / "fused.prm");
  const refine::RefineOutput refined =
      refine::refine_fused(fused, cfg.refiner, cfg.loss);
  write_prm(refined.probs, dir / "refined.prm");
  json meta;
  meta["invalid_frames"] = refined.invalid_frames;
  meta["final_energy"] = refined.final_energy;
  meta["iterations"] = refined.iterations;
  write_text(dir / "refine_meta.json", meta.dump());
}

void stage_estimate(const std::filesystem::path &dir, const RunConfig &cfg,
                    MaskSource source) {
  const ClipMeta meta = read_clip_meta(dir);
  const char *file = source == MaskSource::Refined
                         ? "refined.prm"
                         : (source == MaskSource::Fused ? "fused.prm"
                                                        : "gt_masks.prm");
  const PlaneStack stack = read_prm(dir / file);
  impact::ImpactResult result =
      impact::distance_series(stack, meta.frame_dt_us);
  if (source == MaskSource::Refined) {
    // Frames the refiner flagged carry uninformative uniform maps.
    const json meta_j = json::parse(read_text(dir / "refine_meta.json"));
    const auto invalid = meta_j.at("invalid_frames").get<std::vector<int>>();
    impact::invalidate_frames(result, invalid);
  }
  impact::estimate_impact(result);
  write_impact_json(dir / "impact.json", result, meta.clip_id);
}

std::string impact_to_json(const impact::ImpactResult &result,
                           const std::string &clip_id) {
  json j;
  j["clip_id"] = clip_id;
  j["t_impact_ms"] = double(result.t_impact_us) / 1000.0;
  j["frame_index"] = result.frame_index;
  json frames = json::array();
  for (const auto &m : result.frames) {
    json f;
    f["k"] = m.k;
    f["valid"] = m.valid;
    f["d_px"] = m.d_px ? json(*m.d_px) : json(nullptr);
    f["ball"] = m.ball ? json{m.ball->x, m.ball->y} : json(nullptr);
    f["bat"] = m.bat ? json{m.bat->x, m.bat->y} : json(nullptr);
    frames.push_back(std::move(f));
  }
  j["per_frame"] = std::move(frames);
  return j.dump();
}

void write_impact_json(const std::filesystem::path &path,
                       const impact::ImpactResult &result,
                       const std::string &clip_id) {
  write_text(path, impact_to_json(result, clip_id));
}

ImpactSummary read_impact_json(const std::filesystem::path &path) {
  const json j = json::parse(read_text(path));
  ImpactSummary s;
  s.clip_id = j.at("clip_id").get<std::string>();
  s.t_impact_ms = j.at("t_impact_ms").get<double>();
  s.frame_index = j.at("frame_index").get<int>();
  return s;
}

std::vector<eval::ClipEval> read_clip_evals(const std::filesystem::path &path) {
  const json j = json::parse(read_text(path));
  std::vector<eval::ClipEval> evals;
  for (const auto &e : j.at("clips")) {
    eval::ClipEval c;
    c.clip_id = e.at("clip_id").get<std::string>();
    c.scenario_id = e.value("scenario_id", std::string("0"));
    c.t_est_ms = e.at("t_est_ms").get<double>();
    c.t_gt_ms = e.at("t_gt_ms").get<double>();
    evals.push_back(std::move(c));
  }
  return evals;
}

void write_clip_evals(const std::filesystem::path &path,
                      std::span<const eval::ClipEval> evals) {
  json clips = json::array();
  for (const auto &e : evals)
    clips.push_back({{"clip_id", e.clip_id},
                     {"scenario_id", e.scenario_id},
                     {"t_est_ms", e.t_est_ms},
                     {"t_gt_ms", e.t_gt_ms},
                     {"abs_err_ms", e.abs_err_ms()}});
  write_text(path, json{{"clips", std::move(clips)}}.dump(2));
}

void run_batch(int clip_count, int parallelism,
               const std::function<void(int)> &fn) {
  if (parallelism < 1) throw DomainError("run_batch: parallelism must be >= 1");
  if (parallelism == 1) {
    for (int i = 0; i < clip_count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors;
  errors.resize(std::size_t(parallelism));
  for (int t = 0; t < parallelism; ++t)
    workers.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < clip_count; i = next.fetch_add(1))
          fn(i);
      } catch (...) {
        errors[std::size_t(t)] = std::current_exception();
      }
    });
  for (auto &w : workers) w.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

std::uint64_t clip_seed(std::uint64_t base_seed, int clip_index) {
  // splitmix64 of (base, index) so neighbouring seeds decorrelate.
  std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ull * (std::uint64_t(clip_index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace evimpact::pipeline
