#pragma once

#include "evimpact/types.hpp"

namespace evimpact {

// Sliding-window accumulation of positive-polarity events into dense frames.
// Frame k (1-based, nominal time t_k = k*dt) counts events with p = +1 and
// t in [t_k - window_frames*dt, t_k); counts are normalized as
// min(count, saturation) / saturation. K = floor(duration / dt).
FrameStack accumulate(const EventStream &stream, const AccumConfig &cfg);

}  // namespace evimpact
