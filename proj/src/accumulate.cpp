#include "evimpact/accumulate.hpp"

#include <algorithm>

namespace evimpact {

FrameStack accumulate(const EventStream &stream, const AccumConfig &cfg) {
  stream.validate();
  cfg.validate();
  if (stream.duration_us < cfg.dt_us)
    throw DomainError("accumulate: clip shorter than one frame");

  FrameStack stack;
  stack.k_count = int(stream.duration_us / cfg.dt_us);
  stack.height = stream.height;
  stack.width = stream.width;
  stack.dt_us = cfg.dt_us;
  stack.values.assign(std::size_t(stack.k_count) * stack.frame_size(), 0.0f);

  // Two-pointer sliding window over the sorted stream; per-pixel counts are
  // updated incrementally as the window advances.
  std::vector<int> counts(stack.frame_size(), 0);
  const float inv_sat = 1.0f / float(cfg.saturation);
  std::size_t lo = 0, hi = 0;
  for (int k = 1; k <= stack.k_count; ++k) {
    const std::int64_t t_k = std::int64_t(k) * cfg.dt_us;
    const std::int64_t t_lo = t_k - std::int64_t(cfg.window_frames) * cfg.dt_us;
    while (hi < stream.events.size() && stream.events[hi].t_us < t_k) {
      const Event &e = stream.events[hi++];
      if (e.p > 0) ++counts[std::size_t(e.y) * stack.width + e.x];
    }
    while (lo < hi && stream.events[lo].t_us < t_lo) {
      const Event &e = stream.events[lo++];
      if (e.p > 0) --counts[std::size_t(e.y) * stack.width + e.x];
    }
    auto out = stack.frame(k - 1);
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i] > 0)
        out[i] = float(std::min(counts[i], cfg.saturation)) * inv_sat;
  }
  return stack;
}

}  // namespace evimpact
