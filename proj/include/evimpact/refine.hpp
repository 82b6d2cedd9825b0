#pragma once

#include <optional>
#include <vector>

#include "evimpact/loss.hpp"
#include "evimpact/types.hpp"

namespace evimpact::refine {

struct RefinerConfig {
  double lambda_fid = 1.0;
  double step = 0.5;
  int max_iters = 200;
  double rel_tol = 1e-6;
  double mass_tau = 0.2;  // dropout-detection fraction of the clip-median mass

  void validate() const;
};

// Fused soft targets: a 3-channel simplex stack plus the frames where both
// directions had dropped an object channel.
struct FusedClip {
  PlaneStack q;  // K x 3 x H x W
  std::vector<int> flagged_frames;  // 0-based indices
};

// Per frame and object channel: use the healthy direction if the other one's
// mask mass fell below mass_tau times the clip-median mass, average when both
// are healthy, zero (and flag the frame) when both dropped.
FusedClip fuse_bidirectional(const PlaneStack &m_fwd, const PlaneStack &m_bwd,
                             double mass_tau);

struct RefineOutput {
  PlaneStack probs;                  // K x 3 x H x W simplex stack
  std::vector<int> invalid_frames;   // 0-based, uniform (1/3,1/3,1/3) output
  std::vector<double> final_energy;  // per frame
  std::vector<int> iterations;       // accepted iterations per frame
};

// Per-frame minimization of
//   E = lambda_fid * CE_soft(P, Q) + lambda_smooth * TV(P) + lambda_circ * circ(P_ball)
// over per-pixel logits, by fixed-step gradient descent with step halving.
RefineOutput refine_fused(const FusedClip &fused, const RefinerConfig &cfg,
                          const loss::LossWeights &w);

// Full operation: fuses the bidirectional coarse stacks and refines. The event
// stack is validated for geometry but not otherwise consumed by the refiner.
RefineOutput refine_clip(const FrameStack &events, const PlaneStack &m_fwd,
                         const PlaneStack &m_bwd, const RefinerConfig &cfg,
                         const loss::LossWeights &w);

}  // namespace evimpact::refine
