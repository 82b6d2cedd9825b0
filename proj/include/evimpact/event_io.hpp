#pragma once

#include <filesystem>

#include "evimpact/types.hpp"

namespace evimpact {

// Event CSV: header `t_us,x,y,p`, unsigned decimal fields, p in {0,1} on disk
// (0 -> -1, 1 -> +1 in memory). Rows are sorted by t on read if needed.
EventStream read_events_csv(const std::filesystem::path &path, int width,
                            int height);
void write_events_csv(const EventStream &stream,
                      const std::filesystem::path &path);

// EVF1: magic "EVF1"; little-endian u32 K, H, W, dt_us; K*H*W f32 payload.
void write_evf(const FrameStack &stack, const std::filesystem::path &path);
FrameStack read_evf(const std::filesystem::path &path);

// PRM1: magic "PRM1"; little-endian u32 K, C, H, W; K*C*H*W f32 payload.
void write_prm(const PlaneStack &stack, const std::filesystem::path &path);
PlaneStack read_prm(const std::filesystem::path &path);

// One-hot encoding between label maps and 3-channel probability stacks.
PlaneStack labels_to_onehot(const LabelStack &labels);
LabelStack onehot_to_labels(const PlaneStack &stack);

}  // namespace evimpact
