#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "evimpact/types.hpp"

namespace evimpact::impact {

struct Centroid {
  double x = 0.0;
  double y = 0.0;
};

struct FrameMeasure {
  int k = 0;  // 1-based frame index, t_k = k*dt
  bool valid = false;
  std::optional<Centroid> ball;
  std::optional<Centroid> bat;
  std::optional<double> d_px;
};

struct ImpactResult {
  std::vector<FrameMeasure> frames;
  std::int64_t dt_us = 100;
  int frame_index = 0;          // 1-based argmin frame
  std::int64_t t_impact_us = 0;  // frame_index * dt
};

// Probability-mass-weighted mean pixel position (x = column, y = row).
// Returns nullopt when the total mass is below mass_min.
std::optional<Centroid> weighted_centroid(std::span<const double> channel,
                                          int height, int width,
                                          double mass_min = 1.0);
std::optional<Centroid> weighted_centroid(std::span<const float> channel,
                                          int height, int width,
                                          double mass_min = 1.0);

// Per-frame ball/bat centroids and their Euclidean distance; frames with a
// missing centroid are marked invalid. Throws when no frame is measurable.
ImpactResult distance_series(const PlaneStack &stack, std::int64_t dt_us,
                             double mass_min = 1.0);

// Argmin of d over valid frames (ties -> earliest); fills frame_index and
// t_impact_us on the result.
void estimate_impact(ImpactResult &result);

// Marks the given 0-based frames invalid, e.g. frames the refiner flagged;
// call before estimate_impact.
void invalidate_frames(ImpactResult &result, std::span<const int> frames);

struct ImuTrace {
  double rate_hz = 1000.0;
  std::vector<std::array<double, 3>> samples;  // (ax, ay, az)
};

// IMU trace CSV: header `ax,ay,az`, one floating-point row per sample.
ImuTrace read_imu_csv(const std::filesystem::path &path, double rate_hz = 1000.0);

// Smallest i >= 1 whose squared acceleration norm exceeds twice the preceding
// sample's. Throws DomainError("no impact detected") when no sample qualifies.
int imu_detect(const ImuTrace &trace);

struct LatencyStats {
  double mean = 0.0;
  double stddev = 0.0;  // population (1/n)
  double min = 0.0;
  double max = 0.0;
};

LatencyStats latency_stats(std::span<const double> lags_ms);

}  // namespace evimpact::impact
