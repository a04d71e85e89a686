#include "core/toydiff.hpp"

#include <cmath>
#include <filesystem>

#include "core/bytes.hpp"
#include "core/fnv.hpp"
#include "core/numerics.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace voxcond;

namespace {

ToyConfig tiny_config() {
  ToyConfig cfg;
  cfg.frames = 2;
  cfg.views = 2;
  cfg.latent_h = 6;
  cfg.latent_w = 8;
  cfg.hidden = 4;
  cfg.planes = 3;
  cfg.heads = 2;
  cfg.seed = 21;
  return cfg;
}

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

ClipData random_clip(const ToyConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  const int F = cfg.clip_frames();
  ClipData clip;
  clip.z0 = random_tensor(rng, {F, kLatentChannels, cfg.latent_h, cfg.latent_w});
  clip.semdep = random_tensor(rng, {F, 4, cfg.latent_h, cfg.latent_w}, 0.0, 1.0);
  clip.coord = random_tensor(rng, {F, 3, cfg.latent_h, cfg.latent_w}, 0.0, 1.0);
  clip.mpi = random_tensor(rng, {F, cfg.planes, cfg.latent_h, cfg.latent_w}, 0.0, 0.02);
  clip.fg = Tensor({F, 1, cfg.latent_h, cfg.latent_w});
  for (auto& v : clip.fg.data) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  return clip;
}

void jitter_params(ToyModel& model, uint64_t seed, double scale = 0.05) {
  Rng rng(seed);
  for (const auto& name : model.store().names)
    for (auto& v : model.store().p(name).data) v += rng.uniform(-scale, scale);
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

}  // namespace

TEST_CASE("config validation and json round-trip") {
  ToyConfig cfg = tiny_config();
  ToyConfig back = ToyConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.frames == cfg.frames);
  CHECK(back.heads == cfg.heads);

  ToyConfig bad = cfg;
  bad.hidden = 5;
  CHECK_FAILS_WITH(InvalidArgument, bad.validate());
  bad = cfg;
  bad.frames = 0;
  CHECK_FAILS_WITH(InvalidArgument, bad.validate());
  bad = cfg;
  bad.heads = 3;
  CHECK_FAILS_WITH(InvalidArgument, bad.validate());
}

TEST_CASE("time embedding and frame tags") {
  auto e0 = time_embedding(0.0);
  for (int k = 0; k < 4; ++k) {
    CHECK(e0[2 * k] == doctest::Approx(0.0));      // sin
    CHECK(e0[2 * k + 1] == doctest::Approx(1.0));  // cos
  }
  auto eq = time_embedding(0.25);
  CHECK(eq[0] == doctest::Approx(1.0));  // sin(2*pi*0.25)

  Tensor tags = frame_view_tags(3, 2, 8);
  CHECK(tags.shape == std::vector<int>{6, 8});
  // rows must be pairwise distinct so attention can tell frames apart
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b) {
      double diff = 0.0;
      for (int c = 0; c < 8; ++c)
        diff += std::fabs(tags.at2(a, c) - tags.at2(b, c));
      CHECK(diff > 1e-6);
    }
}

TEST_CASE("clean_frame flags whole time steps across views") {
  // k=1 protects both views of time step 0
  CHECK(clean_frame(0, 2, 1));
  CHECK(clean_frame(1, 2, 1));
  CHECK_FALSE(clean_frame(2, 2, 1));
  CHECK_FALSE(clean_frame(0, 2, 0));
  CHECK(clean_frame(5, 2, 3));
}

TEST_CASE("conditions and adapter are exact no-ops at init") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  ClipData clip = random_clip(cfg, 31);
  Rng rng(32);
  Tensor z = random_tensor(rng, clip.z0.shape);

  Tensor base = model.forward_base(z, 0.4);
  Tensor with_cond = model.forward(z, 0.4, clip);
  CHECK(with_cond.data == base.data);

  model.set_adapter_enabled(false);
  Tensor no_adapter = model.forward(z, 0.4, clip);
  CHECK(no_adapter.data == with_cond.data);
}

TEST_CASE("adapter keeps identity after the base is jittered") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  // jitter everything except the adapter output projections
  Rng rng(33);
  for (const auto& name : model.store().names) {
    if (ToyModel::adapter_param(name) && name.find("zout") != std::string::npos)
      continue;
    for (auto& v : model.store().p(name).data) v += rng.uniform(-0.05, 0.05);
  }
  ClipData clip = random_clip(cfg, 34);
  Tensor z = random_tensor(rng, clip.z0.shape);

  model.set_adapter_enabled(true);
  Tensor on = model.forward(z, 0.7, clip);
  model.set_adapter_enabled(false);
  Tensor off = model.forward(z, 0.7, clip);
  CHECK(on.data == off.data);  // zero-init zout keeps the adapter a no-op
}

TEST_CASE("model backward matches finite differences for every block") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  jitter_params(model, 41);
  ClipData clip = random_clip(cfg, 42);
  Rng rng(43);
  Tensor z = random_tensor(rng, clip.z0.shape);
  Tensor gout = random_tensor(rng, clip.z0.shape);
  const double t = 0.35;

  ForwardCache cache;
  model.forward(z, t, clip, &cache);
  model.store().zero_grads();
  model.backward(cache, gout);

  auto loss = [&] { return dot(gout, model.forward(z, t, clip)); };
  std::vector<std::string> probed = {
      "in.w",          "out.w",         "base1.c1.w", "base2.c2.b",
      "base1.t.w",     "ctrl1.c1.w",    "ctrl2.t.w",  "zp1.w",
      "zp2.w",         "enc.a1.w",      "enc.b2.w",   "enc.m.w",
      "enc.zfuse.w",   "adapter1.c.w",  "adapter1.t.w",
      "adapter2.q.w",  "adapter2.k.w",  "adapter2.v.w",
      "adapter2.o.w",  "adapter1.zout.w"};
  for (const auto& name : probed) {
    REQUIRE_MESSAGE(model.store().has(name), name);
    Tensor& w = model.store().p(name);
    const Tensor& gw = model.store().g(name);
    Rng probe_rng(fnv1a64(name.data(), name.size()));
    for (int probe = 0; probe < 3; ++probe) {
      size_t i = probe_rng.uniform_index(w.data.size());
      double keep = w.data[i];
      w.data[i] = keep + 1e-6;
      double up = loss();
      w.data[i] = keep - 1e-6;
      double dn = loss();
      w.data[i] = keep;
      double fd = (up - dn) / 2e-6;
      CHECK_MESSAGE(std::fabs(gw.data[i] - fd) <=
                        1e-4 * std::max(1.0, std::fabs(fd)),
                    name, " elem ", i, " grad ", gw.data[i], " fd ", fd);
    }
  }
}

TEST_CASE("single-frame single-view model keeps shapes and trains") {
  ToyConfig cfg = tiny_config();
  cfg.frames = 1;
  cfg.views = 1;
  ToyModel model(cfg);
  ClipData clip = random_clip(cfg, 51);
  Rng rng(52);
  Tensor z = random_tensor(rng, clip.z0.shape);
  Tensor out = model.forward(z, 0.5, clip);
  CHECK(out.shape == z.shape);

  TrainParams p;
  p.steps = 3;
  p.lr = 0.01;
  p.clean_max = 0;
  TrainStats stats = train(model, {clip}, p);
  CHECK(stats.steps == 3);
  CHECK(std::isfinite(stats.final_loss));
}

TEST_CASE("guidance zero equals sampling with zeroed conditions") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  jitter_params(model, 61);
  ClipData clip = random_clip(cfg, 62);

  SampleParams p;
  p.steps = 4;
  p.guidance = 0.0;
  p.clean = 0;
  Tensor a = sample(model, clip, p);

  SampleParams q = p;
  q.guidance = 1.0;
  Tensor b = sample(model, zeroed_conditions(clip), q);
  CHECK(a.data == b.data);
}

TEST_CASE("clean frames are held exactly through sampling") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  jitter_params(model, 71);
  ClipData clip = random_clip(cfg, 72);

  SampleParams p;
  p.steps = 5;
  p.clean = 1;
  Tensor z = sample(model, clip, p);
  // flattened frames 0..views-1 belong to the protected first time step
  for (int f = 0; f < cfg.views; ++f)
    for (int c = 0; c < kLatentChannels; ++c)
      for (int i = 0; i < cfg.latent_h; ++i)
        for (int j = 0; j < cfg.latent_w; ++j)
          CHECK(z.at4(f, c, i, j) == clip.z0.at4(f, c, i, j));

  // k = frames holds the whole clip: sampling is the identity on z0
  SampleParams all = p;
  all.clean = cfg.frames;
  Tensor held = sample(model, clip, all);
  CHECK(held.data == clip.z0.data);
}

TEST_CASE("training reduces the loss and is deterministic in the seed") {
  ToyConfig cfg = tiny_config();
  ToyModel a(cfg);
  std::vector<ClipData> clips = {random_clip(cfg, 81), random_clip(cfg, 82)};

  std::string dir = scratch_dir("train_logs");
  TrainParams p;
  p.steps = 40;
  p.lr = 0.05;
  p.log_path = dir + "/a.jsonl";
  TrainStats sa = train(a, clips, p);
  CHECK(sa.steps == 40);
  CHECK(sa.final_loss < sa.initial_loss);

  ToyModel b(cfg);
  p.log_path = dir + "/b.jsonl";
  TrainStats sb = train(b, clips, p);
  CHECK(sa.initial_loss == sb.initial_loss);
  CHECK(sa.final_loss == sb.final_loss);
  CHECK(a.store().checksum() == b.store().checksum());
  CHECK(read_file_bytes(dir + "/a.jsonl") == read_file_bytes(dir + "/b.jsonl"));

  ToyModel c(cfg);
  TrainParams q = p;
  q.seed = p.seed + 1;
  q.log_path.clear();
  TrainStats sc = train(c, clips, q);
  CHECK(sc.final_loss != sa.final_loss);
}

TEST_CASE("training validates parameters and flags divergence") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  std::vector<ClipData> clips = {random_clip(cfg, 91)};

  TrainParams bad;
  bad.steps = 0;
  CHECK_FAILS_WITH(InvalidArgument, train(model, clips, bad));
  bad = TrainParams{};
  bad.clean_max = cfg.frames;  // must leave at least one generated time step
  CHECK_FAILS_WITH(InvalidArgument, train(model, clips, bad));
  CHECK_FAILS_WITH(InvalidArgument, train(model, {}, TrainParams{}));

  TrainParams huge;
  huge.steps = 200;
  huge.lr = 1e6;
  CHECK_FAILS_WITH(Diverged, train(model, clips, huge));
}

TEST_CASE("adapter finetune leaves the frozen weights bit-identical") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  std::vector<ClipData> clips = {random_clip(cfg, 95)};
  TrainParams base;
  base.steps = 10;
  base.lr = 0.05;
  train(model, clips, base);

  uint64_t frozen_before = model.frozen_checksum();
  uint64_t full_before = model.store().checksum();
  TrainParams ft;
  ft.steps = 10;
  ft.lr = 0.05;
  ft.trainable = ToyModel::adapter_param;
  train(model, clips, ft);
  CHECK(model.frozen_checksum() == frozen_before);
  CHECK(model.store().checksum() != full_before);
}

TEST_CASE("mse_by_region splits by mask and skips clean frames") {
  ToyConfig cfg = tiny_config();
  ClipData clip = random_clip(cfg, 97);
  Tensor z = clip.z0;
  const int hw = cfg.latent_h * cfg.latent_w;
  // shift every generated non-clean element by +2 -> mse 4 everywhere
  for (int f = cfg.views; f < cfg.clip_frames(); ++f)
    for (int c = 0; c < kLatentChannels; ++c)
      for (int i = 0; i < hw; ++i)
        z.data[(size_t(f) * kLatentChannels + c) * hw + i] += 2.0;

  RegionMse m = mse_by_region(z, clip, 1, cfg.views);
  CHECK(m.fg == doctest::Approx(4.0));
  CHECK(m.bg == doctest::Approx(4.0));
  size_t total = size_t(cfg.clip_frames() - cfg.views) * kLatentChannels * hw;
  CHECK(m.fg_count + m.bg_count == total);
  CHECK(m.fg_count > 0);
  CHECK(m.bg_count > 0);
}

TEST_CASE("checkpoint round-trip is byte-exact") {
  std::string dir = scratch_dir("ckpt");
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  jitter_params(model, 98);
  model.set_adapter_enabled(false);

  save_checkpoint(model, dir + "/m.tdck");
  ToyModel back = load_checkpoint(dir + "/m.tdck");
  CHECK(back.config().to_json() == model.config().to_json());
  CHECK(back.adapter_enabled() == model.adapter_enabled());
  CHECK(back.store().checksum() == model.store().checksum());
  CHECK(checkpoint_bytes(back) == checkpoint_bytes(model));
  CHECK(read_file_bytes(dir + "/m.tdck") == checkpoint_bytes(model));
}

TEST_CASE("checkpoint parsing rejects malformed payloads") {
  ToyModel model(tiny_config());
  auto bytes = checkpoint_bytes(model);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_FAILS_WITH(BadMagic,
                   checkpoint_from_bytes(bad_magic.data(), bad_magic.size()));

  auto bad_version = bytes;
  bad_version[4] = 0x7f;
  CHECK_FAILS_WITH(UnsupportedVersion,
                   checkpoint_from_bytes(bad_version.data(), bad_version.size()));

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_FAILS_WITH(TruncatedPayload,
                   checkpoint_from_bytes(truncated.data(), truncated.size()));

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_FAILS_WITH(ParseError,
                   checkpoint_from_bytes(trailing.data(), trailing.size()));
}

TEST_CASE("forward validates inputs") {
  ToyConfig cfg = tiny_config();
  ToyModel model(cfg);
  ClipData clip = random_clip(cfg, 99);
  Rng rng(100);
  Tensor z = random_tensor(rng, clip.z0.shape);

  CHECK_FAILS_WITH(InvalidArgument, model.forward(z, 1.5, clip));
  Tensor bad = random_tensor(rng, {1, kLatentChannels, cfg.latent_h, cfg.latent_w});
  CHECK_FAILS_WITH(ShapeMismatch, model.forward(bad, 0.5, clip));
  ClipData bad_clip = clip;
  bad_clip.semdep = random_tensor(rng, {cfg.clip_frames(), 2, cfg.latent_h, cfg.latent_w});
  CHECK_FAILS_WITH(ShapeMismatch, model.forward(z, 0.5, bad_clip));
}
