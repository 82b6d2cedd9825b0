#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evimpact {

// Class channel order used by every 3-channel probability stack.
inline constexpr int kClassBackground = 0;
inline constexpr int kClassBat = 1;
inline constexpr int kClassBall = 2;
inline constexpr int kNumClasses = 3;

// Channel order of coarse (ball, bat) mask pairs.
inline constexpr int kCoarseBall = 0;
inline constexpr int kCoarseBat = 1;

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// One asynchronous brightness-change sample. Polarity is {-1, +1} in memory.
struct Event {
  std::int64_t t_us = 0;
  int x = 0;
  int y = 0;
  int p = +1;
};

struct EventStream {
  int width = 0;
  int height = 0;
  std::int64_t duration_us = 0;
  std::vector<Event> events;  // sorted non-decreasing in t_us

  void validate() const;
};

struct AccumConfig {
  std::int64_t dt_us = 100;  // frame interval, 0.1 ms
  int window_frames = 10;    // T_win = window_frames * dt
  int saturation = 3;        // positive-count clip level

  void validate() const;
};

// K dense event frames, frame k (1-based) at nominal time t_k = k*dt.
// Stored frame-major, row-major within a frame, values in [0, 1].
struct FrameStack {
  int k_count = 0;
  int height = 0;
  int width = 0;
  std::int64_t dt_us = 100;
  std::vector<float> values;

  std::size_t frame_size() const { return std::size_t(height) * width; }
  std::span<float> frame(int k0);              // 0-based index
  std::span<const float> frame(int k0) const;
  float &at(int k0, int y, int x) {
    return values[(std::size_t(k0) * height + y) * width + x];
  }
  float at(int k0, int y, int x) const {
    return values[(std::size_t(k0) * height + y) * width + x];
  }
  void validate() const;
};

// Generic K x C x H x W float stack (frame-major, channel-major within frame,
// row-major within channel). C = 3 for refined probability maps, C = 2 for
// coarse (ball, bat) pairs.
struct PlaneStack {
  int k_count = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  static PlaneStack zeros(int k, int c, int h, int w) {
    PlaneStack s;
    s.k_count = k;
    s.channels = c;
    s.height = h;
    s.width = w;
    s.values.assign(std::size_t(k) * c * h * w, 0.0f);
    return s;
  }
  std::size_t plane_size() const { return std::size_t(height) * width; }
  std::span<float> channel(int k0, int c);
  std::span<const float> channel(int k0, int c) const;
  float &at(int k0, int c, int y, int x) {
    return values[((std::size_t(k0) * channels + c) * height + y) * width + x];
  }
  float at(int k0, int c, int y, int x) const {
    return values[((std::size_t(k0) * channels + c) * height + y) * width + x];
  }
  void validate() const;
  // Additionally checks channels == 3 and the per-pixel simplex constraint.
  void validate_probabilities(double tol = 1e-5) const;
};

// Per-frame class labels (0=background, 1=bat, 2=ball).
struct LabelStack {
  int k_count = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  static LabelStack zeros(int k, int h, int w) {
    LabelStack s;
    s.k_count = k;
    s.height = h;
    s.width = w;
    s.values.assign(std::size_t(k) * h * w, 0);
    return s;
  }
  std::size_t frame_size() const { return std::size_t(height) * width; }
  std::span<std::uint8_t> frame(int k0);
  std::span<const std::uint8_t> frame(int k0) const;
  std::uint8_t &at(int k0, int y, int x) {
    return values[(std::size_t(k0) * height + y) * width + x];
  }
  std::uint8_t at(int k0, int y, int x) const {
    return values[(std::size_t(k0) * height + y) * width + x];
  }
};

}  // namespace evimpact
