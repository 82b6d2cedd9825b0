#include "evimpact/impact.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace evimpact::impact {
namespace {

template <typename T>
std::optional<Centroid> centroid_impl(std::span<const T> channel, int height,
                                      int width, double mass_min) {
  if (height <= 0 || width <= 0)
    throw DimensionError("weighted_centroid: bad dimensions");
  if (channel.size() != std::size_t(height) * width)
    throw DimensionError("weighted_centroid: channel is not H*W");
  double mass = 0.0, mx = 0.0, my = 0.0;
  std::size_t i = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x, ++i) {
      const double p = channel[i];
      mass += p;
      mx += x * p;
      my += y * p;
    }
  if (mass < mass_min) return std::nullopt;
  return Centroid{mx / mass, my / mass};
}

}  // namespace

std::optional<Centroid> weighted_centroid(std::span<const double> channel,
                                          int height, int width,
                                          double mass_min) {
  return centroid_impl(channel, height, width, mass_min);
}

std::optional<Centroid> weighted_centroid(std::span<const float> channel,
                                          int height, int width,
                                          double mass_min) {
  return centroid_impl(channel, height, width, mass_min);
}

ImpactResult distance_series(const PlaneStack &stack, std::int64_t dt_us,
                             double mass_min) {
  stack.validate_probabilities();
  if (dt_us < 1) throw DomainError("distance_series: bad frame interval");
  ImpactResult result;
  result.dt_us = dt_us;
  result.frames.reserve(stack.k_count);
  int valid_count = 0;
  for (int k = 0; k < stack.k_count; ++k) {
    FrameMeasure m;
    m.k = k + 1;
    m.ball = weighted_centroid(stack.channel(k, kClassBall), stack.height,
                               stack.width, mass_min);
    m.bat = weighted_centroid(stack.channel(k, kClassBat), stack.height,
                              stack.width, mass_min);
    if (m.ball && m.bat) {
      m.d_px = std::hypot(m.ball->x - m.bat->x, m.ball->y - m.bat->y);
      m.valid = true;
      ++valid_count;
    }
    result.frames.push_back(m);
  }
  if (valid_count == 0) throw DomainError("distance_series: no measurable frames");
  return result;
}

void estimate_impact(ImpactResult &result) {
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (const FrameMeasure &m : result.frames) {
    if (!m.valid) continue;
    if (*m.d_px < best) {
      best = *m.d_px;
      best_k = m.k;
    }
  }
  if (best_k == 0) throw DomainError("estimate_impact: all frames invalid");
  result.frame_index = best_k;
  result.t_impact_us = std::int64_t(best_k) * result.dt_us;
}

void invalidate_frames(ImpactResult &result, std::span<const int> frames) {
  for (int k0 : frames) {
    if (k0 < 0 || std::size_t(k0) >= result.frames.size())
      throw DimensionError("invalidate_frames: index out of range");
    FrameMeasure &m = result.frames[std::size_t(k0)];
    m.valid = false;
    m.d_px.reset();
  }
}

ImuTrace read_imu_csv(const std::filesystem::path &path, double rate_hz) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  ImuTrace trace;
  trace.rate_hz = rate_hz;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ax,ay,az")
    throw ParseError(path.string() + ": expected header 'ax,ay,az'");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 3> s{};
    std::size_t pos = 0;
    for (int f = 0; f < 3; ++f) {
      const std::size_t comma = line.find(',', pos);
      const std::string field = f < 2 ? line.substr(pos, comma - pos)
                                      : line.substr(pos);
      if ((f < 2) != (comma != std::string::npos))
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected 3 comma-separated fields");
      try {
        std::size_t used = 0;
        s[f] = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception &) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": field is not a number: '" + field + "'");
      }
      pos = comma + 1;
    }
    trace.samples.push_back(s);
  }
  return trace;
}

int imu_detect(const ImuTrace &trace) {
  if (trace.rate_hz <= 0.0) throw DomainError("imu_detect: bad sampling rate");
  if (trace.samples.size() < 2)
    throw DomainError("imu_detect: need at least 2 samples");
  auto sq = [](const std::array<double, 3> &s) {
    return s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
  };
  for (std::size_t i = 1; i < trace.samples.size(); ++i)
    if (sq(trace.samples[i]) > 2.0 * sq(trace.samples[i - 1])) return int(i);
  throw DomainError("no impact detected");
}

LatencyStats latency_stats(std::span<const double> lags_ms) {
  if (lags_ms.empty()) throw DomainError("latency_stats: empty input");
  LatencyStats s;
  s.min = s.max = lags_ms[0];
  double sum = 0.0;
  for (double v : lags_ms) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / double(lags_ms.size());
  double sq = 0.0;
  for (double v : lags_ms) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / double(lags_ms.size()));
  return s;
}

}  // namespace evimpact::impact
