#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "evimpact/types.hpp"

namespace evimpact::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Synthetic bat-ball scene: a ball on a straight path (reflecting off the bat
// with restitution on contact) and a bat modeled as a rotating capsule around
// a pivot. Units: pixels, milliseconds, radians.
struct SceneConfig {
  int width = 346;
  int height = 260;
  double ball_radius = 4.0;
  double ball_speed = 2.5;  // px/ms
  Vec2 ball_start{40.0, 130.0};
  Vec2 ball_dir{1.0, 0.0};  // normalized internally
  Vec2 bat_pivot{300.0, 60.0};
  double bat_length = 90.0;
  double bat_half_width = 3.0;
  double bat_angle0 = 2.0;  // rad
  double bat_omega = 0.0;   // rad/ms
  double bat_alpha = 0.0;   // rad/ms^2
  double restitution = 0.8;
  double noise_rate = 0.1;  // background events per pixel per second
  std::int64_t micro_step_us = 10;
  std::uint64_t seed = 0;
  std::int64_t clip_duration_us = 40000;

  void validate() const;
};

struct ClipBundle {
  EventStream stream;
  LabelStack gt_masks;  // rasterized at t_k = k*frame_dt, k = 1..K
  std::optional<std::int64_t> gt_impact_us;
  std::int64_t frame_dt_us = 100;
  SceneConfig config;
};

// Analytic scene state, shared by the simulator and the ground-truth scan.
struct SceneModel {
  explicit SceneModel(const SceneConfig &cfg);

  Vec2 ball_center(double t_ms) const;
  double bat_angle(double t_ms) const;
  // Signed ball-surface-to-bat-surface clearance at time t.
  double clearance(double t_ms) const;
  bool has_contact() const { return contact_t_ms_.has_value(); }
  std::optional<double> contact_time_ms() const { return contact_t_ms_; }
  void bat_segment(double t_ms, Vec2 &p0, Vec2 &p1) const;

  const SceneConfig &config() const { return cfg_; }

private:
  double straight_clearance(double t_ms) const;
  SceneConfig cfg_;
  Vec2 dir_;  // unit direction
  std::optional<double> contact_t_ms_;
  Vec2 contact_pos_;
  Vec2 velocity_out_;  // px/ms after reflection
};

// Argmin-clearance contact time at micro_step/10 resolution; a contact is
// reported when the minimum clearance is <= 0.5 px (ties -> earliest).
std::optional<std::int64_t> compute_gt_impact(const SceneConfig &cfg);

ClipBundle simulate_clip(const SceneConfig &cfg, std::int64_t frame_dt_us = 100);

// Degradation of ground-truth masks into coarse per-object probability maps,
// mimicking jitter, dropout, shape fluctuation, merge-at-impact and soft edges.
struct DegradeConfig {
  double jitter_sigma = 2.0;
  double dropout_prob = 0.1;
  std::vector<int> morph_range{-1, 0, 1, 2};  // <0 erode, >0 dilate
  int blur_radius = 1;
  int merge_window = 5;  // frames around impact
  int merge_dilate = 2;
  std::uint64_t seed = 0;

  void validate(int height, int width) const;
};

enum class Direction { Forward, Backward };

// Returns a K x 2 x H x W stack (channel 0 = ball, channel 1 = bat) with
// values in [0, 1]. Forward and backward directions use independent RNG
// substreams so their failures are uncorrelated.
PlaneStack degrade_coarse(const LabelStack &gt_masks,
                          std::optional<std::int64_t> gt_impact_us,
                          std::int64_t frame_dt_us, const DegradeConfig &dcfg,
                          Direction direction);

}  // namespace evimpact::sim
