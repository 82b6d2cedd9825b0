#pragma once

#include <cstdint>
#include <span>

#include "evimpact/types.hpp"

namespace evimpact::loss {

struct LossWeights {
  double lambda_ce = 0.5;
  double lambda_dice = 1.0;
  double lambda_smooth = 0.1;
  double lambda_circ = 0.05;
  double w_background = 0.5;
  double w_bat = 1.0;
  double w_ball = 13.0;
  double eps_circ = 1e-6;
  double eps_log = 1e-7;
  double dice_smooth = 1.0;
  double eps_grad = 1e-8;

  void validate() const;
  double class_weight(int c) const;
};

// All kernels operate on a single frame. Probability maps are channel-major
// 3 x H x W double buffers (class order background, bat, ball); label maps
// are H x W with labels in {0, 1, 2}.

// -(1/N) sum_i w_{G(i)} * log(max(P_{G(i)}(i), eps_log))
double ce_weighted(std::span<const double> prob, std::span<const std::uint8_t> labels,
                   int height, int width, const LossWeights &w);

// Mean over the 3 classes of 1 - (2 sum P_c G_c + s) / (sum P_c + sum G_c + s).
double dice(std::span<const double> prob, std::span<const std::uint8_t> labels,
            int height, int width, double smooth = 1.0);

// Anisotropic total variation of one channel: (1/N) sum of absolute forward
// differences, interior only.
double smooth_tv_channel(std::span<const double> chan, int height, int width);
void smooth_tv_channel_grad(std::span<const double> chan, int height, int width,
                            std::span<double> grad);

// 3-channel average of smooth_tv_channel; gradient has the same 3xHxW shape.
double smooth_tv(std::span<const double> prob, int height, int width);
void smooth_tv_grad(std::span<const double> prob, int height, int width,
                    std::span<double> grad);

// Isoperimetric circularity of the ball channel:
// (1/N) * C^2 / (4*pi*A + eps_circ), with C = sum sqrt(dx^2 + dy^2 + eps_grad)
// over all pixels (forward differences, zero where a neighbor is missing) and
// A = sum of the channel.
double circ(std::span<const double> ball, int height, int width,
            double eps_circ = 1e-6, double eps_grad = 1e-8);
void circ_grad(std::span<const double> ball, int height, int width,
               std::span<double> grad, double eps_circ = 1e-6,
               double eps_grad = 1e-8);

// lambda_ce*L_ce + lambda_dice*L_dice + lambda_smooth*L_smooth +
// lambda_circ*L_circ, circularity applied to the ball channel only.
double composite(std::span<const double> prob, std::span<const std::uint8_t> labels,
                 int height, int width, const LossWeights &w);

}  // namespace evimpact::loss
