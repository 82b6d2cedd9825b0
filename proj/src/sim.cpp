#include "evimpact/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace evimpact::sim {
namespace {

double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = 0.0;
  if (len2 > 0.0)
    t = std::clamp(((p.x - a.x) * abx + (p.y - a.y) * aby) / len2, 0.0, 1.0);
  const double cx = a.x + t * abx, cy = a.y + t * aby;
  return std::hypot(p.x - cx, p.y - cy);
}

Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = 0.0;
  if (len2 > 0.0)
    t = std::clamp(((p.x - a.x) * abx + (p.y - a.y) * aby) / len2, 0.0, 1.0);
  return {a.x + t * abx, a.y + t * aby};
}

struct BBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive, empty if x1 < x0

  bool empty() const { return x1 < x0 || y1 < y0; }
  void merge(const BBox &o) {
    if (o.empty()) return;
    if (empty()) {
      *this = o;
      return;
    }
    x0 = std::min(x0, o.x0);
    y0 = std::min(y0, o.y0);
    x1 = std::max(x1, o.x1);
    y1 = std::max(y1, o.y1);
  }
};

BBox clip_bbox(double min_x, double min_y, double max_x, double max_y, int w,
               int h) {
  BBox b;
  b.x0 = std::max(0, int(std::floor(min_x)));
  b.y0 = std::max(0, int(std::floor(min_y)));
  b.x1 = std::min(w - 1, int(std::ceil(max_x)));
  b.y1 = std::min(h - 1, int(std::ceil(max_y)));
  return b;
}

// Scene occupancy at one instant, restricted to the objects' bounding boxes.
struct SceneSnapshot {
  Vec2 ball;
  Vec2 bat_a, bat_b;
  BBox bbox;

  SceneSnapshot(const SceneModel &model, double t_ms, int w, int h) {
    const SceneConfig &cfg = model.config();
    ball = model.ball_center(t_ms);
    model.bat_segment(t_ms, bat_a, bat_b);
    const double r = cfg.ball_radius + 1.0;
    BBox ball_box = clip_bbox(ball.x - r, ball.y - r, ball.x + r, ball.y + r, w, h);
    const double hw = cfg.bat_half_width + 1.0;
    BBox bat_box = clip_bbox(std::min(bat_a.x, bat_b.x) - hw,
                             std::min(bat_a.y, bat_b.y) - hw,
                             std::max(bat_a.x, bat_b.x) + hw,
                             std::max(bat_a.y, bat_b.y) + hw, w, h);
    bbox = ball_box;
    bbox.merge(bat_box);
  }

  bool ball_covers(int x, int y, double radius) const {
    const double dx = x - ball.x, dy = y - ball.y;
    return dx * dx + dy * dy <= radius * radius;
  }
  bool bat_covers(int x, int y, double half_width) const {
    return dist_point_segment({double(x), double(y)}, bat_a, bat_b) <=
           half_width;
  }
};

void binary_dilate(std::vector<std::uint8_t> &mask, int h, int w, int radius) {
  if (radius <= 0) return;
  std::vector<std::uint8_t> src = mask;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask[std::size_t(y) * w + x]) continue;
      bool hit = false;
      for (int dy = -radius; dy <= radius && !hit; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx >= 0 && xx < w && src[std::size_t(yy) * w + xx]) {
            hit = true;
            break;
          }
        }
      }
      if (hit) mask[std::size_t(y) * w + x] = 1;
    }
}

void binary_erode(std::vector<std::uint8_t> &mask, int h, int w, int radius) {
  if (radius <= 0) return;
  std::vector<std::uint8_t> src = mask;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask[std::size_t(y) * w + x]) continue;
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        const int yy = y + dy;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w ||
              !src[std::size_t(yy) * w + xx]) {
            keep = false;
            break;
          }
        }
      }
      if (!keep) mask[std::size_t(y) * w + x] = 0;
    }
}

void box_blur(const std::vector<std::uint8_t> &mask, int h, int w, int radius,
              std::span<float> out) {
  if (radius <= 0) {
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = float(mask[i]);
    return;
  }
  // Separable box filter with zero padding and a constant (2r+1)^2 divisor.
  const int span = 2 * radius + 1;
  std::vector<float> tmp(mask.size(), 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int xx = x + dx;
        if (xx >= 0 && xx < w) s += mask[std::size_t(y) * w + xx];
      }
      tmp[std::size_t(y) * w + x] = s;
    }
  const float inv = 1.0f / float(span * span);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy >= 0 && yy < h) s += tmp[std::size_t(yy) * w + x];
      }
      out[std::size_t(y) * w + x] = std::min(1.0f, s * inv);
    }
}

}  // namespace

void SceneConfig::validate() const {
  if (width <= 0 || height <= 0) throw DomainError("SceneConfig: bad canvas");
  if (ball_radius < 1.0) throw DomainError("SceneConfig: ball_radius must be >= 1");
  if (ball_speed < 0.0) throw DomainError("SceneConfig: negative ball_speed");
  if (bat_length <= 0.0 || bat_half_width <= 0.0)
    throw DomainError("SceneConfig: bad bat geometry");
  if (!(restitution > 0.0 && restitution <= 1.0))
    throw DomainError("SceneConfig: restitution must be in (0, 1]");
  if (noise_rate < 0.0) throw DomainError("SceneConfig: negative noise_rate");
  if (micro_step_us < 1) throw DomainError("SceneConfig: micro_step must be >= 1 us");
  if (clip_duration_us < 1) throw DomainError("SceneConfig: empty clip");
  auto inside = [&](Vec2 p) {
    return p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height;
  };
  const Vec2 tip{bat_pivot.x + bat_length * std::cos(bat_angle0),
                 bat_pivot.y + bat_length * std::sin(bat_angle0)};
  if (!inside(ball_start) || !inside(bat_pivot) || !inside(tip))
    throw DomainError("SceneConfig: geometry outside canvas at t = 0");
}

SceneModel::SceneModel(const SceneConfig &cfg) : cfg_(cfg) {
  cfg.validate();
  const double norm = std::hypot(cfg.ball_dir.x, cfg.ball_dir.y);
  if (norm <= 0.0) throw DomainError("SceneConfig: zero ball direction");
  dir_ = {cfg.ball_dir.x / norm, cfg.ball_dir.y / norm};

  // Contact instant: first time the straight-line clearance reaches zero,
  // scanned at micro_step/10 resolution.
  const double duration_ms = double(cfg.clip_duration_us) / 1000.0;
  const double step_ms = std::max(double(cfg.micro_step_us) / 10.0, 1.0) / 1000.0;
  for (double t = 0.0; t <= duration_ms; t += step_ms) {
    if (straight_clearance(t) <= 0.0) {
      contact_t_ms_ = t;
      break;
    }
  }
  if (contact_t_ms_) {
    const double tc = *contact_t_ms_;
    contact_pos_ = {cfg.ball_start.x + cfg.ball_speed * dir_.x * tc,
                    cfg.ball_start.y + cfg.ball_speed * dir_.y * tc};
    Vec2 a, b;
    bat_segment(tc, a, b);
    const Vec2 q = closest_on_segment(contact_pos_, a, b);
    double nx = contact_pos_.x - q.x, ny = contact_pos_.y - q.y;
    const double nn = std::hypot(nx, ny);
    if (nn > 1e-9) {
      nx /= nn;
      ny /= nn;
    } else {
      nx = -dir_.x;
      ny = -dir_.y;
    }
    const double vx = cfg.ball_speed * dir_.x, vy = cfg.ball_speed * dir_.y;
    const double vn = vx * nx + vy * ny;
    velocity_out_ = {cfg.restitution * (vx - 2.0 * vn * nx),
                     cfg.restitution * (vy - 2.0 * vn * ny)};
  }
}

Vec2 SceneModel::ball_center(double t_ms) const {
  if (!contact_t_ms_ || t_ms < *contact_t_ms_)
    return {cfg_.ball_start.x + cfg_.ball_speed * dir_.x * t_ms,
            cfg_.ball_start.y + cfg_.ball_speed * dir_.y * t_ms};
  const double dt = t_ms - *contact_t_ms_;
  return {contact_pos_.x + velocity_out_.x * dt,
          contact_pos_.y + velocity_out_.y * dt};
}

double SceneModel::bat_angle(double t_ms) const {
  return cfg_.bat_angle0 + cfg_.bat_omega * t_ms +
         0.5 * cfg_.bat_alpha * t_ms * t_ms;
}

void SceneModel::bat_segment(double t_ms, Vec2 &p0, Vec2 &p1) const {
  const double a = bat_angle(t_ms);
  p0 = cfg_.bat_pivot;
  p1 = {cfg_.bat_pivot.x + cfg_.bat_length * std::cos(a),
        cfg_.bat_pivot.y + cfg_.bat_length * std::sin(a)};
}

double SceneModel::straight_clearance(double t_ms) const {
  const Vec2 c{cfg_.ball_start.x + cfg_.ball_speed * dir_.x * t_ms,
               cfg_.ball_start.y + cfg_.ball_speed * dir_.y * t_ms};
  Vec2 a, b;
  bat_segment(t_ms, a, b);
  return dist_point_segment(c, a, b) - cfg_.ball_radius - cfg_.bat_half_width;
}

double SceneModel::clearance(double t_ms) const {
  Vec2 a, b;
  bat_segment(t_ms, a, b);
  return dist_point_segment(ball_center(t_ms), a, b) - cfg_.ball_radius -
         cfg_.bat_half_width;
}

std::optional<std::int64_t> compute_gt_impact(const SceneConfig &cfg) {
  const SceneModel model(cfg);
  const double duration_ms = double(cfg.clip_duration_us) / 1000.0;
  const double step_ms = std::max(double(cfg.micro_step_us) / 10.0, 1.0) / 1000.0;
  double best_clear = std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  for (double t = 0.0; t <= duration_ms; t += step_ms) {
    const double c = model.clearance(t);
    if (c < best_clear) {
      best_clear = c;
      best_t = t;
    }
  }
  if (best_clear > 0.5) return std::nullopt;
  return std::int64_t(std::llround(best_t * 1000.0));
}

ClipBundle simulate_clip(const SceneConfig &cfg, std::int64_t frame_dt_us) {
  const SceneModel model(cfg);
  if (frame_dt_us < 1) throw DomainError("simulate_clip: bad frame interval");

  ClipBundle bundle;
  bundle.config = cfg;
  bundle.frame_dt_us = frame_dt_us;
  bundle.gt_impact_us = compute_gt_impact(cfg);
  bundle.stream.width = cfg.width;
  bundle.stream.height = cfg.height;
  bundle.stream.duration_us = cfg.clip_duration_us;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int w = cfg.width, h = cfg.height;
  std::vector<std::uint8_t> occ(std::size_t(h) * w, 0);
  bool any_covered = false;

  // Initial occupancy at t = 0.
  {
    const SceneSnapshot snap(model, 0.0, w, h);
    for (int y = snap.bbox.y0; y <= snap.bbox.y1; ++y)
      for (int x = snap.bbox.x0; x <= snap.bbox.x1; ++x) {
        const bool covered = snap.ball_covers(x, y, cfg.ball_radius) ||
                             snap.bat_covers(x, y, cfg.bat_half_width);
        occ[std::size_t(y) * w + x] = covered;
        any_covered = any_covered || covered;
      }
  }

  std::vector<Event> events;
  BBox prev_bbox = SceneSnapshot(model, 0.0, w, h).bbox;
  for (std::int64_t t_prev = 0; t_prev < cfg.clip_duration_us;
       t_prev += cfg.micro_step_us) {
    const std::int64_t t_cur = std::min(t_prev + cfg.micro_step_us,
                                        cfg.clip_duration_us);
    const SceneSnapshot snap(model, double(t_cur) / 1000.0, w, h);
    BBox region = snap.bbox;
    region.merge(prev_bbox);
    if (!region.empty()) {
      for (int y = region.y0; y <= region.y1; ++y)
        for (int x = region.x0; x <= region.x1; ++x) {
          const bool covered = snap.ball_covers(x, y, cfg.ball_radius) ||
                               snap.bat_covers(x, y, cfg.bat_half_width);
          std::uint8_t &prev = occ[std::size_t(y) * w + x];
          if (covered != bool(prev)) {
            Event e;
            e.x = x;
            e.y = y;
            e.p = covered ? +1 : -1;
            e.t_us = t_prev + std::int64_t(unit(rng) * double(t_cur - t_prev));
            events.push_back(e);
            prev = covered;
          }
          any_covered = any_covered || covered;
        }
    }
    prev_bbox = snap.bbox;

    // Background noise: Poisson process over the whole canvas.
    if (cfg.noise_rate > 0.0) {
      const double mean = cfg.noise_rate * double(w) * double(h) *
                          double(t_cur - t_prev) * 1e-6;
      std::poisson_distribution<int> poisson(mean);
      const int n_noise = poisson(rng);
      std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
      std::uniform_int_distribution<int> pol(0, 1);
      for (int i = 0; i < n_noise; ++i) {
        Event e;
        e.x = xs(rng);
        e.y = ys(rng);
        e.p = pol(rng) ? +1 : -1;
        e.t_us = t_prev + std::int64_t(unit(rng) * double(t_cur - t_prev));
        events.push_back(e);
      }
    }
  }
  if (!any_covered) throw DomainError("simulate_clip: degenerate scene");

  std::stable_sort(events.begin(), events.end(),
                   [](const Event &a, const Event &b) { return a.t_us < b.t_us; });
  bundle.stream.events = std::move(events);

  // Ground-truth labels on the downstream frame grid, overlap labeled ball.
  const int k_count = int(cfg.clip_duration_us / frame_dt_us);
  bundle.gt_masks = LabelStack::zeros(k_count, h, w);
  for (int k = 1; k <= k_count; ++k) {
    const SceneSnapshot snap(model, double(k * frame_dt_us) / 1000.0, w, h);
    auto frame = bundle.gt_masks.frame(k - 1);
    for (int y = snap.bbox.y0; y <= snap.bbox.y1; ++y)
      for (int x = snap.bbox.x0; x <= snap.bbox.x1; ++x) {
        if (snap.ball_covers(x, y, cfg.ball_radius))
          frame[std::size_t(y) * w + x] = kClassBall;
        else if (snap.bat_covers(x, y, cfg.bat_half_width))
          frame[std::size_t(y) * w + x] = kClassBat;
      }
  }
  return bundle;
}

void DegradeConfig::validate(int height, int width) const {
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0))
    throw DomainError("DegradeConfig: dropout_prob outside [0, 1]");
  if (jitter_sigma < 0.0) throw DomainError("DegradeConfig: negative jitter_sigma");
  if (morph_range.empty()) throw DomainError("DegradeConfig: empty morph_range");
  const int limit = std::min(height, width) / 4;
  for (int r : morph_range)
    if (std::abs(r) > limit) throw DomainError("DegradeConfig: morph radius too large");
  if (blur_radius < 0 || blur_radius > limit)
    throw DomainError("DegradeConfig: bad blur_radius");
  if (merge_window < 0 || merge_dilate < 0 || merge_dilate > limit)
    throw DomainError("DegradeConfig: bad merge parameters");
}

PlaneStack degrade_coarse(const LabelStack &gt_masks,
                          std::optional<std::int64_t> gt_impact_us,
                          std::int64_t frame_dt_us, const DegradeConfig &dcfg,
                          Direction direction) {
  dcfg.validate(gt_masks.height, gt_masks.width);
  const int h = gt_masks.height, w = gt_masks.width;
  const int k_count = gt_masks.k_count;

  std::mt19937_64 rng(dcfg.seed ^ (direction == Direction::Forward
                                       ? 0x9e3779b97f4a7c15ull
                                       : 0xc2b2ae3d27d4eb4full));
  std::normal_distribution<double> jitter(0.0, std::max(dcfg.jitter_sigma, 1e-12));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> morph_pick(0, dcfg.morph_range.size() - 1);

  const int k_impact = gt_impact_us
                           ? int(std::llround(double(*gt_impact_us) / double(frame_dt_us)))
                           : -1;

  PlaneStack out = PlaneStack::zeros(k_count, 2, h, w);
  std::vector<std::uint8_t> mask(std::size_t(h) * w);
  constexpr std::uint8_t object_class[2] = {kClassBall, kClassBat};
  for (int k = 0; k < k_count; ++k) {
    auto gt = gt_masks.frame(k);
    for (int obj = 0; obj < 2; ++obj) {
      const int dx = dcfg.jitter_sigma > 0.0 ? int(std::lround(jitter(rng))) : 0;
      const int dy = dcfg.jitter_sigma > 0.0 ? int(std::lround(jitter(rng))) : 0;
      const bool dropped = unit(rng) < dcfg.dropout_prob;
      const int morph = dcfg.morph_range[morph_pick(rng)];

      std::fill(mask.begin(), mask.end(), 0);
      if (!dropped) {
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx >= 0 && sx < w && sy >= 0 && sy < h &&
                gt[std::size_t(sy) * w + sx] == object_class[obj])
              mask[std::size_t(y) * w + x] = 1;
          }
        if (morph > 0)
          binary_dilate(mask, h, w, morph);
        else if (morph < 0)
          binary_erode(mask, h, w, -morph);
        if (k_impact >= 0 && std::abs(k + 1 - k_impact) <= dcfg.merge_window)
          binary_dilate(mask, h, w, dcfg.merge_dilate);
      }
      box_blur(mask, h, w, dcfg.blur_radius, out.channel(k, obj));
    }
  }
  return out;
}

}  // namespace evimpact::sim
