#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/layers.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "json.hpp"

namespace voxcond {

/* Latent video channels: palette rgb, depth, normalized xyz, foreground. */
inline constexpr int kLatentChannels = 8;

struct ToyConfig {
  int frames = 4;
  int views = 2;
  int latent_h = 24;
  int latent_w = 40;
  int hidden = 8;
  int planes = 8;
  int heads = 2;
  bool adapter = true;
  uint64_t seed = 1;

  int clip_frames() const { return frames * views; }
  void validate() const;
  nlohmann::json to_json() const;
  static ToyConfig from_json(const nlohmann::json& j);
};

/* One clip, flattened frame index f = time * views + view. */
struct ClipData {
  Tensor z0;      // (F, 8, h, w) in [-1, 1]
  Tensor semdep;  // (F, 4, h, w) in [0, 1]
  Tensor coord;   // (F, 3, h, w) in [0, 1]
  Tensor mpi;     // (F, P, h, w) label ids / 255
  Tensor fg;      // (F, 1, h, w) binary
};

ClipData zeroed_conditions(const ClipData& clip);
bool clean_frame(int f, int views, int k);

std::array<double, 8> time_embedding(double t);
Tensor frame_view_tags(int frames, int views, int channels);

struct ResCache {
  Tensor x, a;
};

struct AdapterCache {
  Tensor x, a1, a2, att_out;
  AttnCache att;
};

struct EncoderCache {
  Tensor semdep, coord, mpi;
  Tensor ta1, fa, m, cm, tb1, fb, cc;
};

struct ForwardCache {
  bool control = false;
  bool adapter = false;
  std::array<double, 8> temb{};
  Tensor z, x0;
  EncoderCache enc;
  Tensor g0, c1, c2, a1, a2;
  ResCache rc1, rc2;
  AdapterCache ad1, ad2;
  ResCache rb1, rb2;
  Tensor b1, b2;
};

/* Velocity predictor: a two-block residual net with a parallel control
 * branch fed by encoded condition maps.  Zero-initialized projections make
 * the control branch and the temporal adapters exact no-ops at init. */
class ToyModel {
 public:
  explicit ToyModel(const ToyConfig& cfg);

  const ToyConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  bool adapter_enabled() const { return adapter_enabled_; }
  void set_adapter_enabled(bool on);

  static bool adapter_param(const std::string& name);
  uint64_t frozen_checksum() const;

  Tensor forward(const Tensor& z_t, double t, const ClipData& cond,
                 ForwardCache* cache = nullptr) const;
  Tensor forward_base(const Tensor& z_t, double t,
                      ForwardCache* cache = nullptr) const;
  void backward(const ForwardCache& cache, const Tensor& gout);

 private:
  Tensor run(const Tensor& z_t, double t, const ClipData* cond,
             ForwardCache* cache) const;
  Tensor encode(const ClipData& cond, EncoderCache* cache) const;
  void encode_bwd(const EncoderCache& cache, const Tensor& gcond);
  Tensor res_fwd(const std::string& prefix, const Tensor& x,
                 const std::array<double, 8>& temb, ResCache* cache) const;
  Tensor res_bwd(const std::string& prefix, const ResCache& cache,
                 const std::array<double, 8>& temb, const Tensor& gy);
  Tensor adapter_fwd(const std::string& prefix, const Tensor& x,
                     AdapterCache* cache) const;
  Tensor adapter_bwd(const std::string& prefix, const AdapterCache& cache,
                     const Tensor& gy);

  ToyConfig cfg_;
  bool adapter_enabled_;
  Tensor pos_;
  ParamStore store_;
};

struct TrainParams {
  int steps = 500;
  double lr = 0.05;
  double gamma = 2.0;
  double cond_dropout = 0.1;
  int clean_max = 1;
  uint64_t seed = 7;
  std::string log_path;
  std::function<bool(const std::string&)> trainable;
};

struct TrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
};

TrainStats train(ToyModel& model, const std::vector<ClipData>& clips,
                 const TrainParams& p);

struct SampleParams {
  int steps = 8;
  double guidance = 2.0;
  int clean = 1;
  uint64_t seed = 11;
};

Tensor sample(const ToyModel& model, const ClipData& clip,
              const SampleParams& p);

struct RegionMse {
  double fg = 0.0;
  double bg = 0.0;
  size_t fg_count = 0;
  size_t bg_count = 0;
};

/* MSE against clip.z0 over generated frames only, split by the fg mask. */
RegionMse mse_by_region(const Tensor& z, const ClipData& clip, int clean,
                        int views);

std::vector<uint8_t> checkpoint_bytes(const ToyModel& model);
ToyModel checkpoint_from_bytes(const uint8_t* data, size_t size);
void save_checkpoint(const ToyModel& model, const std::string& path);
ToyModel load_checkpoint(const std::string& path);

}  // namespace voxcond
