#include "core/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxcond {

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  require(!betas.empty(), ErrorCode::InvalidArgument, "schedule needs steps");
  NoiseSchedule s;
  s.betas = std::move(betas);
  double abar = 1.0;
  for (double b : s.betas) {
    require(std::isfinite(b) && b > 0.0 && b < 1.0, ErrorCode::InvalidArgument,
            "betas must lie in (0,1)");
    abar *= 1.0 - b;
    s.alpha_bars.push_back(abar);
  }
  return s;
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  require(steps >= 1, ErrorCode::InvalidArgument, "schedule needs steps");
  std::vector<double> betas(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    double f = steps == 1 ? 0.0 : double(i) / (steps - 1);
    betas[size_t(i)] = beta_start + f * (beta_end - beta_start);
  }
  return from_betas(std::move(betas));
}

double NoiseSchedule::alpha_bar(int t) const {
  require(t >= 0 && t <= steps(), ErrorCode::InvalidArgument,
          "t outside schedule range");
  return t == 0 ? 1.0 : alpha_bars[size_t(t) - 1];
}

Tensor forward_noise(const Tensor& z0, int t, const NoiseSchedule& schedule,
                     const Tensor& noise) {
  require_same_shape(z0, noise, "forward_noise");
  double abar = schedule.alpha_bar(t);
  double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
  Tensor out(z0.shape);
  for (size_t i = 0; i < out.numel(); ++i) out[i] = a * z0[i] + b * noise[i];
  return out;
}

Tensor rf_interpolate(const Tensor& z0, const Tensor& eps, double t) {
  require_same_shape(z0, eps, "rf_interpolate");
  require(std::isfinite(t) && t >= 0.0 && t <= 1.0, ErrorCode::InvalidArgument,
          "rf time must lie in [0,1]");
  Tensor out(z0.shape);
  for (size_t i = 0; i < out.numel(); ++i)
    out[i] = (1.0 - t) * z0[i] + t * eps[i];
  return out;
}

Tensor rf_velocity_target(const Tensor& z0, const Tensor& eps) {
  require_same_shape(z0, eps, "rf_velocity_target");
  Tensor out(z0.shape);
  for (size_t i = 0; i < out.numel(); ++i) out[i] = eps[i] - z0[i];
  return out;
}

Tensor rf_euler_sample(
    const Tensor& z_at_1, int steps,
    const std::function<Tensor(const Tensor&, double)>& velocity,
    const std::function<void(Tensor&, double)>& post_step) {
  require(steps >= 1, ErrorCode::InvalidArgument, "steps must be >= 1");
  Tensor z = z_at_1;
  for (int i = 0; i < steps; ++i) {
    double t = 1.0 - double(i) / steps;
    double t_next = 1.0 - double(i + 1) / steps;
    double dt = t - t_next;
    Tensor v = velocity(z, t);
    require_same_shape(z, v, "rf_euler_sample velocity");
    for (size_t k = 0; k < z.numel(); ++k) z[k] -= dt * v[k];
    if (post_step) post_step(z, t_next);
  }
  return z;
}

LossGrad masked_diffusion_loss(const Tensor& e, const Tensor& mask, double gamma,
                               const std::vector<uint8_t>* clean_frames) {
  require(std::isfinite(gamma) && gamma >= 0.0, ErrorCode::InvalidArgument,
          "gamma must be >= 0");
  bool broadcast = false;
  if (mask.same_shape(e)) {
    broadcast = false;
  } else {
    require(e.rank() == 4 && mask.rank() == 4 && mask.dim(0) == e.dim(0) &&
                mask.dim(1) == 1 && mask.dim(2) == e.dim(2) &&
                mask.dim(3) == e.dim(3),
            ErrorCode::ShapeMismatch,
            "mask must match e or be single-channel");
    broadcast = true;
  }
  for (double m : mask.data)
    require(m == 0.0 || m == 1.0, ErrorCode::InvalidArgument,
            "mask must be binary");

  const int F = e.rank() == 4 ? e.dim(0) : 1;
  if (clean_frames)
    require(int(clean_frames->size()) == F, ErrorCode::ShapeMismatch,
            "clean-frame flags must match the frame count");
  const size_t per_frame = e.numel() / size_t(F);

  LossGrad out;
  out.grad = Tensor(e.shape);
  size_t counted = 0;
  double sum = 0.0;
  for (int f = 0; f < F; ++f) {
    if (clean_frames && (*clean_frames)[size_t(f)]) continue;
    counted += per_frame;
    for (size_t j = 0; j < per_frame; ++j) {
      size_t i = size_t(f) * per_frame + j;
      double m;
      if (broadcast) {
        size_t hw = size_t(e.dim(2)) * e.dim(3);
        m = mask.data[size_t(f) * hw + (j % hw)];
      } else {
        m = mask[i];
      }
      double w = 1.0 + gamma * m;
      sum += e[i] * e[i] * w;
      out.grad[i] = 2.0 * e[i] * w;  // divided by N below
    }
  }
  require(counted > 0, ErrorCode::InvalidArgument,
          "loss needs at least one generated frame");
  out.value = sum / double(counted);
  for (double& g : out.grad.data) g /= double(counted);
  return out;
}

LossGrad cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  require(logits.rank() == 2, ErrorCode::ShapeMismatch, "logits must be (N,L)");
  const int N = logits.dim(0), L = logits.dim(1);
  require(int(targets.size()) == N, ErrorCode::ShapeMismatch,
          "targets must have one label per row");
  LossGrad out;
  out.grad = Tensor(logits.shape);
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    int y = targets[size_t(i)];
    require(y >= 0 && y < L, ErrorCode::LabelOutOfRange, "target label out of range");
    double mx = logits.at2(i, 0);
    for (int c = 1; c < L; ++c) mx = std::max(mx, logits.at2(i, c));
    double z = 0.0;
    for (int c = 0; c < L; ++c) z += std::exp(logits.at2(i, c) - mx);
    double logz = std::log(z) + mx;
    sum += logz - logits.at2(i, y);
    for (int c = 0; c < L; ++c) {
      double p = std::exp(logits.at2(i, c) - logz);
      out.grad.at2(i, c) = (p - (c == y ? 1.0 : 0.0)) / N;
    }
  }
  out.value = sum / N;
  return out;
}

LossGrad2 kl_standard_normal(const Tensor& mu, const Tensor& logvar) {
  require_same_shape(mu, logvar, "kl_standard_normal");
  const double N = double(mu.numel());
  LossGrad2 out;
  out.grad_a = Tensor(mu.shape);
  out.grad_b = Tensor(mu.shape);
  double sum = 0.0;
  for (size_t i = 0; i < mu.numel(); ++i) {
    double ev = std::exp(logvar[i]);
    sum += 0.5 * (mu[i] * mu[i] + ev - 1.0 - logvar[i]);
    out.grad_a[i] = mu[i] / N;
    out.grad_b[i] = 0.5 * (ev - 1.0) / N;
  }
  out.value = sum / N;
  return out;
}

LossGrad lovasz_softmax(const Tensor& probs, const std::vector<int>& targets) {
  require(probs.rank() == 2, ErrorCode::ShapeMismatch, "probs must be (N,L)");
  const int N = probs.dim(0), L = probs.dim(1);
  require(int(targets.size()) == N, ErrorCode::ShapeMismatch,
          "targets must have one label per row");
  for (double p : probs.data)
    require(std::isfinite(p) && p >= -1e-3 && p <= 1.0 + 1e-3,
            ErrorCode::InvalidArgument, "probs out of range");
  for (int y : targets)
    require(y >= 0 && y < L, ErrorCode::LabelOutOfRange, "target label out of range");

  LossGrad out;
  out.grad = Tensor(probs.shape);

  std::vector<int> present;
  for (int c = 0; c < L; ++c) {
    bool any = false;
    for (int i = 0; i < N && !any; ++i) any = targets[size_t(i)] == c;
    if (any) present.push_back(c);
  }
  if (present.empty()) return out;  // defined as 0

  std::vector<double> margins(static_cast<size_t>(N));
  std::vector<int> order(static_cast<size_t>(N));
  double total = 0.0;
  for (int c : present) {
    for (int i = 0; i < N; ++i) {
      bool is_c = targets[size_t(i)] == c;
      margins[size_t(i)] = is_c ? 1.0 - probs.at2(i, c) : probs.at2(i, c);
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return margins[size_t(a)] > margins[size_t(b)];
    });
    /* Jaccard-loss extension weights along the sorted margins. */
    double gts = 0.0;
    for (int i = 0; i < N; ++i) gts += targets[size_t(i)] == c ? 1.0 : 0.0;
    double inter = gts, uni = gts, prev_jac = 0.0;
    for (int k = 0; k < N; ++k) {
      int i = order[size_t(k)];
      bool is_c = targets[size_t(i)] == c;
      inter -= is_c ? 1.0 : 0.0;
      uni += is_c ? 0.0 : 1.0;
      double jac = 1.0 - inter / uni;
      double w = jac - prev_jac;
      prev_jac = jac;
      total += margins[size_t(i)] * w;
      out.grad.at2(i, c) += (is_c ? -1.0 : 1.0) * w;
    }
  }
  out.value = total / double(present.size());
  for (double& g : out.grad.data) g /= double(present.size());
  return out;
}

Tensor cfg_combine(const Tensor& cond, const Tensor& uncond, double scale) {
  require_same_shape(cond, uncond, "cfg_combine");
  require(std::isfinite(scale), ErrorCode::InvalidArgument,
          "cfg scale must be finite");
  Tensor out(cond.shape);
  for (size_t i = 0; i < out.numel(); ++i)
    out[i] = uncond[i] + scale * (cond[i] - uncond[i]);
  return out;
}

FrameMask first_k_mask(int frames, int k) {
  require(frames >= 1, ErrorCode::InvalidArgument, "frames must be >= 1");
  require(k >= 0 && k <= frames, ErrorCode::InvalidArgument,
          "k must lie in [0, frames]");
  return FrameMask{frames, k};
}

}  // namespace voxcond
