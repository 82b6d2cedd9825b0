#include "evimpact/types.hpp"

#include <cmath>

namespace evimpact {

void EventStream::validate() const {
  if (width <= 0 || height <= 0)
    throw DomainError("EventStream: non-positive geometry");
  std::int64_t prev = -1;
  for (const Event &e : events) {
    if (e.t_us < 0) throw DomainError("EventStream: negative timestamp");
    if (e.t_us < prev) throw DomainError("EventStream: events not sorted by t");
    if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height)
      throw DomainError("EventStream: event outside declared geometry");
    if (e.p != 1 && e.p != -1)
      throw DomainError("EventStream: polarity must be -1 or +1");
    prev = e.t_us;
  }
}

void AccumConfig::validate() const {
  if (dt_us < 1) throw DomainError("AccumConfig: dt must be >= 1 us");
  if (window_frames < 1) throw DomainError("AccumConfig: window_frames must be >= 1");
  if (saturation < 1) throw DomainError("AccumConfig: saturation must be >= 1");
}

std::span<float> FrameStack::frame(int k0) {
  return {values.data() + std::size_t(k0) * frame_size(), frame_size()};
}

std::span<const float> FrameStack::frame(int k0) const {
  return {values.data() + std::size_t(k0) * frame_size(), frame_size()};
}

void FrameStack::validate() const {
  if (k_count < 0 || height <= 0 || width <= 0 || dt_us < 1)
    throw DomainError("FrameStack: bad dimensions");
  if (values.size() != std::size_t(k_count) * frame_size())
    throw DimensionError("FrameStack: value count does not match K*H*W");
  for (float v : values)
    if (!(v >= 0.0f && v <= 1.0f))
      throw DomainError("FrameStack: value outside [0, 1]");
}

std::span<float> PlaneStack::channel(int k0, int c) {
  return {values.data() + (std::size_t(k0) * channels + c) * plane_size(),
          plane_size()};
}

std::span<const float> PlaneStack::channel(int k0, int c) const {
  return {values.data() + (std::size_t(k0) * channels + c) * plane_size(),
          plane_size()};
}

void PlaneStack::validate() const {
  if (k_count < 0 || channels <= 0 || height <= 0 || width <= 0)
    throw DomainError("PlaneStack: bad dimensions");
  if (values.size() != std::size_t(k_count) * channels * plane_size())
    throw DimensionError("PlaneStack: value count does not match K*C*H*W");
  for (float v : values)
    if (!(v >= 0.0f && v <= 1.0f))
      throw DomainError("PlaneStack: value outside [0, 1]");
}

void PlaneStack::validate_probabilities(double tol) const {
  validate();
  if (channels != kNumClasses)
    throw DimensionError("PlaneStack: probability stack must have 3 channels");
  const std::size_t n = plane_size();
  for (int k = 0; k < k_count; ++k) {
    auto bg = channel(k, kClassBackground);
    auto bat = channel(k, kClassBat);
    auto ball = channel(k, kClassBall);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = double(bg[i]) + bat[i] + ball[i];
      if (std::abs(s - 1.0) > tol)
        throw DomainError("PlaneStack: pixel class sum off the simplex");
    }
  }
}

std::span<std::uint8_t> LabelStack::frame(int k0) {
  return {values.data() + std::size_t(k0) * frame_size(), frame_size()};
}

std::span<const std::uint8_t> LabelStack::frame(int k0) const {
  return {values.data() + std::size_t(k0) * frame_size(), frame_size()};
}

}  // namespace evimpact
