#include "evimpact/refine.hpp"

#include <algorithm>
#include <cmath>

namespace evimpact::refine {
namespace {

double clip_median(std::vector<double> masses) {
  std::sort(masses.begin(), masses.end());
  const std::size_t n = masses.size();
  return 0.5 * (masses[(n - 1) / 2] + masses[n / 2]);
}

struct FrameEnergy {
  const loss::LossWeights &w;
  double lambda_fid;
  int height, width;
  std::size_t n;

  // Softmax over the 3 class logits per pixel.
  void softmax(std::span<const double> theta, std::span<double> p) const {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = theta[i], b = theta[n + i], c = theta[2 * n + i];
      const double m = std::max(a, std::max(b, c));
      const double ea = std::exp(a - m), eb = std::exp(b - m), ec = std::exp(c - m);
      const double inv = 1.0 / (ea + eb + ec);
      p[i] = ea * inv;
      p[n + i] = eb * inv;
      p[2 * n + i] = ec * inv;
    }
  }

  double value(std::span<const double> p, std::span<const double> q) const {
    double ce = 0.0;
    for (std::size_t i = 0; i < 3 * n; ++i)
      if (q[i] > 0.0) ce -= q[i] * std::log(std::max(p[i], w.eps_log));
    double e = lambda_fid * ce / double(n);
    if (w.lambda_smooth > 0)
      e += w.lambda_smooth * loss::smooth_tv(p, height, width);
    if (w.lambda_circ > 0)
      e += w.lambda_circ * loss::circ(p.subspan(2 * n, n), height, width,
                                      w.eps_circ, w.eps_grad);
    return e;
  }

  // Gradient with respect to the logits, via the softmax Jacobian.
  void gradient(std::span<const double> p, std::span<const double> q,
                std::span<double> grad_p, std::span<double> grad_theta,
                std::vector<double> &scratch) const {
    std::fill(grad_p.begin(), grad_p.end(), 0.0);
    const double fid_scale = lambda_fid / double(n);
    for (std::size_t i = 0; i < 3 * n; ++i)
      if (q[i] > 0.0 && p[i] > w.eps_log) grad_p[i] -= fid_scale * q[i] / p[i];
    if (w.lambda_smooth > 0) {
      scratch.assign(3 * n, 0.0);
      loss::smooth_tv_grad(p, height, width, scratch);
      for (std::size_t i = 0; i < 3 * n; ++i)
        grad_p[i] += w.lambda_smooth * scratch[i];
    }
    if (w.lambda_circ > 0) {
      scratch.assign(n, 0.0);
      loss::circ_grad(p.subspan(2 * n, n), height, width,
                      std::span<double>(scratch.data(), n), w.eps_circ,
                      w.eps_grad);
      for (std::size_t i = 0; i < n; ++i)
        grad_p[2 * n + i] += w.lambda_circ * scratch[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double p0 = p[i], p1 = p[n + i], p2 = p[2 * n + i];
      const double dot =
          grad_p[i] * p0 + grad_p[n + i] * p1 + grad_p[2 * n + i] * p2;
      grad_theta[i] = p0 * (grad_p[i] - dot);
      grad_theta[n + i] = p1 * (grad_p[n + i] - dot);
      grad_theta[2 * n + i] = p2 * (grad_p[2 * n + i] - dot);
    }
  }
};

}  // namespace

void RefinerConfig::validate() const {
  if (step <= 0.0) throw DomainError("RefinerConfig: step must be positive");
  if (max_iters < 0) throw DomainError("RefinerConfig: negative max_iters");
  if (rel_tol <= 0.0) throw DomainError("RefinerConfig: rel_tol must be positive");
  if (!(mass_tau > 0.0 && mass_tau < 1.0))
    throw DomainError("RefinerConfig: mass_tau must be in (0, 1)");
  if (lambda_fid < 0.0) throw DomainError("RefinerConfig: negative lambda_fid");
}

FusedClip fuse_bidirectional(const PlaneStack &m_fwd, const PlaneStack &m_bwd,
                             double mass_tau) {
  m_fwd.validate();
  m_bwd.validate();
  if (m_fwd.channels != 2 || m_bwd.channels != 2)
    throw DimensionError("fuse_bidirectional: expected 2-channel coarse stacks");
  if (m_fwd.k_count != m_bwd.k_count || m_fwd.height != m_bwd.height ||
      m_fwd.width != m_bwd.width)
    throw DimensionError("fuse_bidirectional: geometry mismatch");
  const int k_count = m_fwd.k_count;
  const std::size_t n = m_fwd.plane_size();

  // Per object/direction mask masses and their clip medians.
  std::vector<double> mass_fwd[2], mass_bwd[2];
  double median_fwd[2], median_bwd[2];
  for (int obj = 0; obj < 2; ++obj) {
    mass_fwd[obj].resize(k_count);
    mass_bwd[obj].resize(k_count);
    for (int k = 0; k < k_count; ++k) {
      double sf = 0.0, sb = 0.0;
      auto f = m_fwd.channel(k, obj);
      auto b = m_bwd.channel(k, obj);
      for (std::size_t i = 0; i < n; ++i) {
        sf += f[i];
        sb += b[i];
      }
      mass_fwd[obj][k] = sf;
      mass_bwd[obj][k] = sb;
    }
    median_fwd[obj] = clip_median(mass_fwd[obj]);
    median_bwd[obj] = clip_median(mass_bwd[obj]);
  }

  FusedClip fused;
  fused.q = PlaneStack::zeros(k_count, kNumClasses, m_fwd.height, m_fwd.width);
  std::vector<double> chan[2];
  chan[0].resize(n);
  chan[1].resize(n);
  for (int k = 0; k < k_count; ++k) {
    bool frame_flagged = false;
    for (int obj = 0; obj < 2; ++obj) {
      const bool fwd_ok = mass_fwd[obj][k] >= mass_tau * median_fwd[obj];
      const bool bwd_ok = mass_bwd[obj][k] >= mass_tau * median_bwd[obj];
      auto f = m_fwd.channel(k, obj);
      auto b = m_bwd.channel(k, obj);
      if (fwd_ok && bwd_ok) {
        for (std::size_t i = 0; i < n; ++i) chan[obj][i] = 0.5 * (double(f[i]) + b[i]);
      } else if (fwd_ok) {
        for (std::size_t i = 0; i < n; ++i) chan[obj][i] = f[i];
      } else if (bwd_ok) {
        for (std::size_t i = 0; i < n; ++i) chan[obj][i] = b[i];
      } else {
        std::fill(chan[obj].begin(), chan[obj].end(), 0.0);
        frame_flagged = true;
      }
    }
    auto bg = fused.q.channel(k, kClassBackground);
    auto bat = fused.q.channel(k, kClassBat);
    auto ball = fused.q.channel(k, kClassBall);
    for (std::size_t i = 0; i < n; ++i) {
      const double qb = chan[kCoarseBall][i];
      const double qt = chan[kCoarseBat][i];
      const double qg = std::clamp(1.0 - qb - qt, 0.0, 1.0);
      const double inv = 1.0 / (qb + qt + qg);
      ball[i] = float(qb * inv);
      bat[i] = float(qt * inv);
      bg[i] = float(qg * inv);
    }
    if (frame_flagged) fused.flagged_frames.push_back(k);
  }
  return fused;
}

RefineOutput refine_fused(const FusedClip &fused, const RefinerConfig &cfg,
                          const loss::LossWeights &w) {
  cfg.validate();
  w.validate();
  fused.q.validate_probabilities();
  const int k_count = fused.q.k_count;
  const int height = fused.q.height, width = fused.q.width;
  const std::size_t n = fused.q.plane_size();

  RefineOutput out;
  out.probs = PlaneStack::zeros(k_count, kNumClasses, height, width);
  out.invalid_frames = fused.flagged_frames;
  out.final_energy.assign(k_count, 0.0);
  out.iterations.assign(k_count, 0);

  const FrameEnergy energy{w, cfg.lambda_fid, height, width, n};
  std::vector<double> q(3 * n), theta(3 * n), p(3 * n), trial_theta(3 * n),
      trial_p(3 * n), grad_p(3 * n), grad_theta(3 * n), scratch;

  std::vector<bool> flagged(k_count, false);
  for (int k : fused.flagged_frames) flagged[k] = true;

  for (int k = 0; k < k_count; ++k) {
    if (flagged[k]) {
      auto frame = out.probs.channel(k, 0);
      std::fill(frame.data(), frame.data() + 3 * n, 1.0f / 3.0f);
      continue;
    }
    for (int c = 0; c < kNumClasses; ++c) {
      auto src = fused.q.channel(k, c);
      for (std::size_t i = 0; i < n; ++i) {
        q[std::size_t(c) * n + i] = src[i];
        theta[std::size_t(c) * n + i] = std::log(double(src[i]) + w.eps_log);
      }
    }
    energy.softmax(theta, p);
    double e = energy.value(p, q);
    double step = cfg.step;
    int halvings = 0;
    int iters = 0;
    bool converged = false;
    while (iters < cfg.max_iters && !converged) {
      energy.gradient(p, q, grad_p, grad_theta, scratch);
      bool accepted = false;
      while (halvings <= 10) {
        for (std::size_t i = 0; i < 3 * n; ++i)
          trial_theta[i] = theta[i] - step * grad_theta[i];
        energy.softmax(trial_theta, trial_p);
        const double e_trial = energy.value(trial_p, q);
        if (e_trial <= e) {
          const double decrease = (e - e_trial) / std::max(std::abs(e), 1e-300);
          theta.swap(trial_theta);
          p.swap(trial_p);
          e = e_trial;
          ++iters;
          accepted = true;
          converged = decrease < cfg.rel_tol;
          break;
        }
        step *= 0.5;
        ++halvings;
      }
      if (!accepted) break;  // halving budget exhausted
    }
    auto frame = out.probs.channel(k, 0);
    for (std::size_t i = 0; i < 3 * n; ++i) frame.data()[i] = float(p[i]);
    out.final_energy[k] = e;
    out.iterations[k] = iters;
  }
  return out;
}

RefineOutput refine_clip(const FrameStack &events, const PlaneStack &m_fwd,
                         const PlaneStack &m_bwd, const RefinerConfig &cfg,
                         const loss::LossWeights &w) {
  events.validate();
  if (events.k_count != m_fwd.k_count || events.height != m_fwd.height ||
      events.width != m_fwd.width)
    throw DimensionError("refine_clip: event stack geometry mismatch");
  // The event channel is carried for interface completeness; the baseline
  // refiner optimizes against the fused coarse targets only.
  return refine_fused(fuse_bidirectional(m_fwd, m_bwd, cfg.mass_tau), cfg, w);
}

}  // namespace evimpact::refine
