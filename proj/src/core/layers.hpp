#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace voxcond {

/*
 * Hand-written forward/backward layers for the toy denoiser. All activations
 * are (F, C, H, W) tensors; spatial ops treat F as batch, temporal ops mix
 * along F per spatial site. Backward functions accumulate into parameter
 * grads and write input grads.
 */

struct ParamStore {
  std::vector<std::string> names;  // insertion order, used for checksums
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> grads;

  Tensor& add(const std::string& name, Tensor init);
  bool has(const std::string& name) const { return params.count(name) > 0; }
  Tensor& p(const std::string& name);
  const Tensor& p(const std::string& name) const;
  Tensor& g(const std::string& name);
  void zero_grads();
  /* Plain gradient-descent update over params where trainable(name). */
  void sgd_step(double lr, const std::function<bool(const std::string&)>& trainable);
  /* Fingerprint of raw param bytes, insertion order, filtered by prefix
   * ("" = all). Used to prove frozen weights stayed frozen. */
  uint64_t checksum(const std::string& prefix = "", bool exclude = false) const;
};

/* Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init. */
Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng);

/* 3x3 same-padding conv; w (Co,Ci,3,3), b (Co). */
Tensor conv3x3_fwd(const Tensor& x, const Tensor& w, const Tensor& b);
void conv3x3_bwd(const Tensor& x, const Tensor& w, const Tensor& gout,
                 Tensor& gx, Tensor& gw, Tensor& gb);

/* Pointwise conv; w (Co,Ci), b (Co). */
Tensor conv1x1_fwd(const Tensor& x, const Tensor& w, const Tensor& b);
void conv1x1_bwd(const Tensor& x, const Tensor& w, const Tensor& gout,
                 Tensor& gx, Tensor& gw, Tensor& gb);

Tensor tanh_fwd(const Tensor& x);
Tensor tanh_bwd(const Tensor& y, const Tensor& gout);  // y = tanh(x)

/* Depthwise temporal conv, kernel 3, same padding along F; w (C,3), b (C). */
Tensor tconv3_fwd(const Tensor& x, const Tensor& w, const Tensor& b);
void tconv3_bwd(const Tensor& x, const Tensor& w, const Tensor& gout,
                Tensor& gx, Tensor& gw, Tensor& gb);

/* Multi-head self-attention along the frame axis, independently per spatial
 * site. Fixed positional tags `pos` (F,C) are added to the query/key input
 * only. Weights wq/wk/wv/wo are (C,C); heads must divide C. */
struct AttnCache {
  Tensor xa;   // x + pos
  Tensor q, k, v;
  Tensor att;  // (heads, F, F, H*W) softmax rows
  Tensor o;    // pre-output-projection mix
};

Tensor attention_fwd(const Tensor& x, const Tensor& wq, const Tensor& wk,
                     const Tensor& wv, const Tensor& wo, const Tensor& pos,
                     int heads, AttnCache* cache);
void attention_bwd(const Tensor& x, const Tensor& wq, const Tensor& wk,
                   const Tensor& wv, const Tensor& wo, int heads,
                   const AttnCache& cache, const Tensor& gout, Tensor& gx,
                   Tensor& gwq, Tensor& gwk, Tensor& gwv, Tensor& gwo);

/* Concatenate along the channel axis. */
Tensor concat_channels(const std::vector<const Tensor*>& parts);
void split_channels(const Tensor& g, const std::vector<Tensor*>& parts);

}  // namespace voxcond
