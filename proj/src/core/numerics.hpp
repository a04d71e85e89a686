#pragma once

#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace voxcond {

/* Variance-preserving forward-noising schedule; alpha_bars[t-1] is the
 * cumulative product of (1 - beta_i) up to step t. */
struct NoiseSchedule {
  std::vector<double> betas;       // each in (0,1)
  std::vector<double> alpha_bars;  // strictly decreasing, in (0,1)

  static NoiseSchedule from_betas(std::vector<double> betas);
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  int steps() const { return int(betas.size()); }
  double alpha_bar(int t) const;  // t in [0, steps]; alpha_bar(0) = 1
};

/* sqrt(abar_t) * z0 + sqrt(1 - abar_t) * noise. */
Tensor forward_noise(const Tensor& z0, int t, const NoiseSchedule& schedule,
                     const Tensor& noise);

/* Rectified-flow interpolant z_t = (1-t) z0 + t eps, t in [0,1]. */
Tensor rf_interpolate(const Tensor& z0, const Tensor& eps, double t);

/* Velocity regression target eps - z0 (constant along the path). */
Tensor rf_velocity_target(const Tensor& z0, const Tensor& eps);

/* Euler integration from t=1 to t=0 on the time grid t_i = 1 - i/steps
 * (endpoints exact): z <- z - dt * velocity(z, t). The optional post_step
 * hook runs after every update, e.g. to hold conditioning frames fixed. */
Tensor rf_euler_sample(
    const Tensor& z_at_1, int steps,
    const std::function<Tensor(const Tensor&, double)>& velocity,
    const std::function<void(Tensor&, double)>& post_step = nullptr);

struct LossGrad {
  double value = 0.0;
  Tensor grad;  // d value / d first argument
};

struct LossGrad2 {
  double value = 0.0;
  Tensor grad_a, grad_b;
};

/* mean over counted elements of e^2 * (1 + gamma * m). mask is binary and
 * either shaped like e or like e with a single channel (broadcast over the
 * channel axis of (F,C,H,W) input). clean_frames (optional, length F)
 * excludes flagged frames from both the sum and the normalizer. */
LossGrad masked_diffusion_loss(const Tensor& e, const Tensor& mask, double gamma,
                               const std::vector<uint8_t>* clean_frames = nullptr);

/* Row-wise softmax cross-entropy; logits (N,L), targets length N.
 * grad = (softmax - onehot) / N. */
LossGrad cross_entropy(const Tensor& logits, const std::vector<int>& targets);

/* mean of 0.5 * (mu^2 + exp(logvar) - 1 - logvar). */
LossGrad2 kl_standard_normal(const Tensor& mu, const Tensor& logvar);

/* Lovasz-softmax: per-class sorted-margin Jaccard surrogate averaged over
 * the classes present in targets; 0 when no labels are present. probs (N,L)
 * rows are expected to sum to 1 (caller obligation; values are only checked
 * for range so perturbed evaluations stay well-defined). */
LossGrad lovasz_softmax(const Tensor& probs, const std::vector<int>& targets);

/* uncond + scale * (cond - uncond). */
Tensor cfg_combine(const Tensor& cond, const Tensor& uncond, double scale);

/* Frames 0..k-1 are clean conditioning frames. */
struct FrameMask {
  int frames = 0;
  int k = 0;
  bool clean(int f) const { return f < k; }
  std::vector<uint8_t> flags() const {
    std::vector<uint8_t> v(static_cast<size_t>(frames));
    for (int f = 0; f < frames; ++f) v[size_t(f)] = clean(f) ? 1 : 0;
    return v;
  }
};

FrameMask first_k_mask(int frames, int k);

}  // namespace voxcond
