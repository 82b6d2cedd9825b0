#include "evimpact/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace evimpact::loss {
namespace {

void check_frame(std::size_t prob_size, std::size_t label_size, int height,
                 int width) {
  const std::size_t n = std::size_t(height) * width;
  if (height <= 0 || width <= 0)
    throw DimensionError("loss: non-positive frame dimensions");
  if (prob_size != std::size_t(kNumClasses) * n)
    throw DimensionError("loss: probability buffer is not 3*H*W");
  if (label_size != n) throw DimensionError("loss: label buffer is not H*W");
}

void check_channel(std::size_t size, int height, int width) {
  if (height <= 0 || width <= 0)
    throw DimensionError("loss: non-positive frame dimensions");
  if (size != std::size_t(height) * width)
    throw DimensionError("loss: channel buffer is not H*W");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void LossWeights::validate() const {
  if (lambda_ce < 0 || lambda_dice < 0 || lambda_smooth < 0 || lambda_circ < 0)
    throw DomainError("LossWeights: lambdas must be non-negative");
  if (w_background <= 0 || w_bat <= 0 || w_ball <= 0)
    throw DomainError("LossWeights: class weights must be positive");
  if (eps_circ <= 0 || eps_log <= 0 || eps_grad <= 0)
    throw DomainError("LossWeights: epsilons must be positive");
}

double LossWeights::class_weight(int c) const {
  switch (c) {
    case kClassBackground: return w_background;
    case kClassBat: return w_bat;
    case kClassBall: return w_ball;
  }
  throw DomainError("LossWeights: class index out of range");
}

double ce_weighted(std::span<const double> prob,
                   std::span<const std::uint8_t> labels, int height, int width,
                   const LossWeights &w) {
  check_frame(prob.size(), labels.size(), height, width);
  const std::size_t n = std::size_t(height) * width;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int g = labels[i];
    if (g >= kNumClasses) throw DomainError("ce_weighted: label out of range");
    const double p = std::max(prob[std::size_t(g) * n + i], w.eps_log);
    sum += w.class_weight(g) * std::log(p);
  }
  return -sum / double(n);
}

double dice(std::span<const double> prob, std::span<const std::uint8_t> labels,
            int height, int width, double smooth) {
  check_frame(prob.size(), labels.size(), height, width);
  const std::size_t n = std::size_t(height) * width;
  double total = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    double inter = 0.0, p_sum = 0.0, g_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = prob[std::size_t(c) * n + i];
      const double g = labels[i] == c ? 1.0 : 0.0;
      inter += p * g;
      p_sum += p;
      g_sum += g;
    }
    total += 1.0 - (2.0 * inter + smooth) / (p_sum + g_sum + smooth);
  }
  return total / kNumClasses;
}

double smooth_tv_channel(std::span<const double> chan, int height, int width) {
  check_channel(chan.size(), height, width);
  double sum = 0.0;
  for (int y = 0; y < height; ++y) {
    const double *row = chan.data() + std::size_t(y) * width;
    for (int x = 0; x + 1 < width; ++x) sum += std::abs(row[x + 1] - row[x]);
  }
  for (int y = 0; y + 1 < height; ++y) {
    const double *row = chan.data() + std::size_t(y) * width;
    for (int x = 0; x < width; ++x) sum += std::abs(row[x + width] - row[x]);
  }
  return sum / (double(height) * width);
}

void smooth_tv_channel_grad(std::span<const double> chan, int height, int width,
                            std::span<double> grad) {
  check_channel(chan.size(), height, width);
  check_channel(grad.size(), height, width);
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_n = 1.0 / (double(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = std::size_t(y) * width + x;
      if (x + 1 < width) {
        const double s = sign(chan[i + 1] - chan[i]) * inv_n;
        grad[i + 1] += s;
        grad[i] -= s;
      }
      if (y + 1 < height) {
        const double s = sign(chan[i + width] - chan[i]) * inv_n;
        grad[i + width] += s;
        grad[i] -= s;
      }
    }
  }
}

double smooth_tv(std::span<const double> prob, int height, int width) {
  const std::size_t n = std::size_t(height) * width;
  if (prob.size() != std::size_t(kNumClasses) * n)
    throw DimensionError("smooth_tv: buffer is not 3*H*W");
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c)
    sum += smooth_tv_channel(prob.subspan(std::size_t(c) * n, n), height, width);
  return sum / kNumClasses;
}

void smooth_tv_grad(std::span<const double> prob, int height, int width,
                    std::span<double> grad) {
  const std::size_t n = std::size_t(height) * width;
  if (prob.size() != std::size_t(kNumClasses) * n || grad.size() != prob.size())
    throw DimensionError("smooth_tv_grad: buffer is not 3*H*W");
  for (int c = 0; c < kNumClasses; ++c) {
    smooth_tv_channel_grad(prob.subspan(std::size_t(c) * n, n), height, width,
                           grad.subspan(std::size_t(c) * n, n));
    for (std::size_t i = 0; i < n; ++i) grad[std::size_t(c) * n + i] /= kNumClasses;
  }
}

double circ(std::span<const double> ball, int height, int width,
            double eps_circ, double eps_grad) {
  check_channel(ball.size(), height, width);
  double perimeter = 0.0, area = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = std::size_t(y) * width + x;
      const double dx = x + 1 < width ? ball[i + 1] - ball[i] : 0.0;
      const double dy = y + 1 < height ? ball[i + width] - ball[i] : 0.0;
      perimeter += std::sqrt(dx * dx + dy * dy + eps_grad);
      area += ball[i];
    }
  }
  const double n = double(height) * width;
  return perimeter * perimeter / (n * (4.0 * std::numbers::pi * area + eps_circ));
}

void circ_grad(std::span<const double> ball, int height, int width,
               std::span<double> grad, double eps_circ, double eps_grad) {
  check_channel(ball.size(), height, width);
  check_channel(grad.size(), height, width);
  const std::size_t count = ball.size();
  double perimeter = 0.0, area = 0.0;
  std::vector<double> inv_r(count);  // 1 / sqrt(dx^2 + dy^2 + eps_grad)
  std::vector<double> dxs(count, 0.0), dys(count, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = std::size_t(y) * width + x;
      const double dx = x + 1 < width ? ball[i + 1] - ball[i] : 0.0;
      const double dy = y + 1 < height ? ball[i + width] - ball[i] : 0.0;
      const double r = std::sqrt(dx * dx + dy * dy + eps_grad);
      perimeter += r;
      area += ball[i];
      inv_r[i] = 1.0 / r;
      dxs[i] = dx;
      dys[i] = dy;
    }
  }
  const double n = double(height) * width;
  const double denom = 4.0 * std::numbers::pi * area + eps_circ;
  const double dv_dC = 2.0 * perimeter / (n * denom);
  const double dv_dA =
      -perimeter * perimeter * 4.0 * std::numbers::pi / (n * denom * denom);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = std::size_t(y) * width + x;
      double dC = -(dxs[i] + dys[i]) * inv_r[i];
      if (x > 0) dC += dxs[i - 1] * inv_r[i - 1];
      if (y > 0) dC += dys[i - width] * inv_r[i - width];
      grad[i] = dv_dC * dC + dv_dA;
    }
  }
}

double composite(std::span<const double> prob,
                 std::span<const std::uint8_t> labels, int height, int width,
                 const LossWeights &w) {
  w.validate();
  check_frame(prob.size(), labels.size(), height, width);
  const std::size_t n = std::size_t(height) * width;
  double total = 0.0;
  if (w.lambda_ce > 0)
    total += w.lambda_ce * ce_weighted(prob, labels, height, width, w);
  if (w.lambda_dice > 0)
    total += w.lambda_dice * dice(prob, labels, height, width, w.dice_smooth);
  if (w.lambda_smooth > 0)
    total += w.lambda_smooth * smooth_tv(prob, height, width);
  if (w.lambda_circ > 0)
    total += w.lambda_circ *
             circ(prob.subspan(std::size_t(kClassBall) * n, n), height, width,
                  w.eps_circ, w.eps_grad);
  return total;
}

}  // namespace evimpact::loss
