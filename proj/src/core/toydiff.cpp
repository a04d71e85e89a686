#include "core/toydiff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "core/bytes.hpp"
#include "core/numerics.hpp"

namespace voxcond {

namespace {
constexpr char kCheckpointMagic[4] = {'T', 'D', 'C', 'K'};
constexpr uint16_t kCheckpointVersion = 1;
}  // namespace

void ToyConfig::validate() const {
  require(frames >= 1 && views >= 1, ErrorCode::InvalidArgument,
          "frames and views must be positive");
  require(latent_h >= 1 && latent_w >= 1, ErrorCode::InvalidArgument,
          "latent size must be positive");
  require(hidden >= 2 && hidden % 2 == 0, ErrorCode::InvalidArgument,
          "hidden width must be even");
  require(heads >= 1 && hidden % heads == 0, ErrorCode::InvalidArgument,
          "heads must divide hidden width");
  require(planes >= 1, ErrorCode::InvalidArgument, "planes must be positive");
}

nlohmann::json ToyConfig::to_json() const {
  return {{"adapter", adapter},   {"frames", frames},
          {"heads", heads},       {"hidden", hidden},
          {"latent_h", latent_h}, {"latent_w", latent_w},
          {"planes", planes},     {"seed", seed},
          {"views", views}};
}

ToyConfig ToyConfig::from_json(const nlohmann::json& j) {
  ToyConfig c;
  try {
    c.adapter = j.value("adapter", c.adapter);
    c.frames = j.value("frames", c.frames);
    c.views = j.value("views", c.views);
    c.latent_h = j.value("latent_h", c.latent_h);
    c.latent_w = j.value("latent_w", c.latent_w);
    c.hidden = j.value("hidden", c.hidden);
    c.planes = j.value("planes", c.planes);
    c.heads = j.value("heads", c.heads);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config parse error: ") + e.what());
  }
  c.validate();
  return c;
}

ClipData zeroed_conditions(const ClipData& clip) {
  ClipData z;
  z.z0 = Tensor(clip.z0.shape);
  z.semdep = Tensor(clip.semdep.shape);
  z.coord = Tensor(clip.coord.shape);
  z.mpi = Tensor(clip.mpi.shape);
  z.fg = Tensor(clip.fg.shape);
  return z;
}

bool clean_frame(int f, int views, int k) { return f / views < k; }

std::array<double, 8> time_embedding(double t) {
  std::array<double, 8> e{};
  for (int k = 0; k < 4; ++k) {
    double w = 2.0 * std::numbers::pi * double(k + 1) * t;
    e[size_t(2 * k)] = std::sin(w);
    e[size_t(2 * k + 1)] = std::cos(w);
  }
  return e;
}

Tensor frame_view_tags(int frames, int views, int channels) {
  require(channels >= 2 && channels % 2 == 0, ErrorCode::InvalidArgument,
          "tag width must be even");
  Tensor pos({frames * views, channels});
  int half = channels / 2;
  auto fill = [&](int f, int base, int n, int idx) {
    for (int m = 0; m < n; ++m) {
      double rate = std::pow(100.0, -double(m / 2) / double(std::max(1, n / 2)));
      double v = double(idx) * rate;
      pos.at2(f, base + m) = (m % 2 == 0) ? std::sin(v) : std::cos(v);
    }
  };
  for (int ti = 0; ti < frames; ++ti)
    for (int vi = 0; vi < views; ++vi) {
      int f = ti * views + vi;
      fill(f, 0, half, ti);
      fill(f, half, channels - half, vi);
    }
  return pos;
}

namespace {
Tensor validated_tags(const ToyConfig& cfg) {
  cfg.validate();
  return frame_view_tags(cfg.frames, cfg.views, cfg.hidden);
}
}  // namespace

ToyModel::ToyModel(const ToyConfig& cfg)
    : cfg_(cfg), adapter_enabled_(cfg.adapter), pos_(validated_tags(cfg_)) {
  Rng rng(cfg_.seed);
  const int ch = cfg_.hidden;
  auto conv3 = [&](const std::string& n, int co, int ci) {
    store_.add(n + ".w", init_uniform({co, ci, 3, 3}, ci * 9, rng));
    store_.add(n + ".b", Tensor({co}));
  };
  auto conv1 = [&](const std::string& n, int co, int ci, bool zero) {
    store_.add(n + ".w",
               zero ? Tensor({co, ci}) : init_uniform({co, ci}, ci, rng));
    store_.add(n + ".b", Tensor({co}));
  };
  auto res = [&](const std::string& p) {
    conv3(p + ".c1", ch, ch);
    store_.add(p + ".t.w", init_uniform({ch, 8}, 8, rng));
    conv3(p + ".c2", ch, ch);
  };
  auto adapter = [&](const std::string& p) {
    conv3(p + ".c", ch, ch);
    store_.add(p + ".t.w", init_uniform({ch, 3}, 3, rng));
    store_.add(p + ".t.b", Tensor({ch}));
    store_.add(p + ".q.w", init_uniform({ch, ch}, ch, rng));
    store_.add(p + ".k.w", init_uniform({ch, ch}, ch, rng));
    store_.add(p + ".v.w", init_uniform({ch, ch}, ch, rng));
    store_.add(p + ".o.w", init_uniform({ch, ch}, ch, rng));
    conv1(p + ".zout", ch, ch, true);
  };
  conv3("in", ch, kLatentChannels);
  conv3("out", kLatentChannels, ch);
  res("base1");
  res("base2");
  res("ctrl1");
  res("ctrl2");
  conv1("zp1", ch, ch, true);
  conv1("zp2", ch, ch, true);
  conv3("enc.a1", ch, 4);
  conv3("enc.a2", ch, ch);
  conv1("enc.m", 4, cfg_.planes, false);
  conv3("enc.b1", ch, 7);
  conv3("enc.b2", ch, ch);
  conv1("enc.zfuse", ch, 2 * ch, true);
  adapter("adapter1");
  adapter("adapter2");
}

void ToyModel::set_adapter_enabled(bool on) {
  adapter_enabled_ = on;
  cfg_.adapter = on;
}

bool ToyModel::adapter_param(const std::string& name) {
  return name.rfind("adapter", 0) == 0;
}

uint64_t ToyModel::frozen_checksum() const {
  return store_.checksum("adapter", true);
}

Tensor ToyModel::encode(const ClipData& cond, EncoderCache* cache) const {
  const int F = cfg_.clip_frames();
  auto check = [&](const Tensor& t, int c, const char* what) {
    require(t.rank() == 4 && t.dim(0) == F && t.dim(1) == c &&
                t.dim(2) == cfg_.latent_h && t.dim(3) == cfg_.latent_w,
            ErrorCode::ShapeMismatch, std::string(what) + " shape");
  };
  check(cond.semdep, 4, "semdep");
  check(cond.coord, 3, "coord");
  check(cond.mpi, cfg_.planes, "mpi");
  Tensor ta1 =
      tanh_fwd(conv3x3_fwd(cond.semdep, store_.p("enc.a1.w"), store_.p("enc.a1.b")));
  Tensor fa = conv3x3_fwd(ta1, store_.p("enc.a2.w"), store_.p("enc.a2.b"));
  Tensor m = conv1x1_fwd(cond.mpi, store_.p("enc.m.w"), store_.p("enc.m.b"));
  Tensor cm = concat_channels({&cond.coord, &m});
  Tensor tb1 =
      tanh_fwd(conv3x3_fwd(cm, store_.p("enc.b1.w"), store_.p("enc.b1.b")));
  Tensor fb = conv3x3_fwd(tb1, store_.p("enc.b2.w"), store_.p("enc.b2.b"));
  Tensor cc = concat_channels({&fa, &fb});
  Tensor out = conv1x1_fwd(cc, store_.p("enc.zfuse.w"), store_.p("enc.zfuse.b"));
  if (cache) {
    cache->semdep = cond.semdep;
    cache->coord = cond.coord;
    cache->mpi = cond.mpi;
    cache->ta1 = std::move(ta1);
    cache->fa = std::move(fa);
    cache->m = std::move(m);
    cache->cm = std::move(cm);
    cache->tb1 = std::move(tb1);
    cache->fb = std::move(fb);
    cache->cc = std::move(cc);
  }
  return out;
}

void ToyModel::encode_bwd(const EncoderCache& ec, const Tensor& gcond) {
  Tensor gcc;
  conv1x1_bwd(ec.cc, store_.p("enc.zfuse.w"), gcond, gcc,
              store_.g("enc.zfuse.w"), store_.g("enc.zfuse.b"));
  Tensor gfa(ec.fa.shape), gfb(ec.fb.shape);
  split_channels(gcc, {&gfa, &gfb});

  Tensor gtb1;
  conv3x3_bwd(ec.tb1, store_.p("enc.b2.w"), gfb, gtb1, store_.g("enc.b2.w"),
              store_.g("enc.b2.b"));
  Tensor gub1 = tanh_bwd(ec.tb1, gtb1);
  Tensor gcm;
  conv3x3_bwd(ec.cm, store_.p("enc.b1.w"), gub1, gcm, store_.g("enc.b1.w"),
              store_.g("enc.b1.b"));
  Tensor gcoord(ec.coord.shape), gm(ec.m.shape);
  split_channels(gcm, {&gcoord, &gm});
  Tensor gmpi;
  conv1x1_bwd(ec.mpi, store_.p("enc.m.w"), gm, gmpi, store_.g("enc.m.w"),
              store_.g("enc.m.b"));

  Tensor gta1;
  conv3x3_bwd(ec.ta1, store_.p("enc.a2.w"), gfa, gta1, store_.g("enc.a2.w"),
              store_.g("enc.a2.b"));
  Tensor gua1 = tanh_bwd(ec.ta1, gta1);
  Tensor gsd;
  conv3x3_bwd(ec.semdep, store_.p("enc.a1.w"), gua1, gsd,
              store_.g("enc.a1.w"), store_.g("enc.a1.b"));
}

Tensor ToyModel::res_fwd(const std::string& prefix, const Tensor& x,
                         const std::array<double, 8>& temb,
                         ResCache* cache) const {
  Tensor h = conv3x3_fwd(x, store_.p(prefix + ".c1.w"),
                         store_.p(prefix + ".c1.b"));
  const Tensor& tw = store_.p(prefix + ".t.w");
  const int F = h.dim(0), C = h.dim(1), S = h.dim(2) * h.dim(3);
  for (int c = 0; c < C; ++c) {
    double tb = 0;
    for (int k = 0; k < 8; ++k) tb += tw.at2(c, k) * temb[size_t(k)];
    for (int f = 0; f < F; ++f)
      for (int s = 0; s < S; ++s) h.data[(size_t(f) * C + c) * S + s] += tb;
  }
  Tensor a = tanh_fwd(h);
  Tensor y = conv3x3_fwd(a, store_.p(prefix + ".c2.w"),
                         store_.p(prefix + ".c2.b"));
  for (size_t i = 0; i < y.numel(); ++i) y[i] += x[i];
  if (cache) {
    cache->x = x;
    cache->a = std::move(a);
  }
  return y;
}

Tensor ToyModel::res_bwd(const std::string& prefix, const ResCache& cache,
                         const std::array<double, 8>& temb, const Tensor& gy) {
  Tensor ga;
  conv3x3_bwd(cache.a, store_.p(prefix + ".c2.w"), gy, ga,
              store_.g(prefix + ".c2.w"), store_.g(prefix + ".c2.b"));
  Tensor gh = tanh_bwd(cache.a, ga);
  Tensor& gtw = store_.g(prefix + ".t.w");
  const int F = gh.dim(0), C = gh.dim(1), S = gh.dim(2) * gh.dim(3);
  for (int c = 0; c < C; ++c) {
    double sum = 0;
    for (int f = 0; f < F; ++f)
      for (int s = 0; s < S; ++s) sum += gh.data[(size_t(f) * C + c) * S + s];
    for (int k = 0; k < 8; ++k) gtw.at2(c, k) += sum * temb[size_t(k)];
  }
  Tensor gx;
  conv3x3_bwd(cache.x, store_.p(prefix + ".c1.w"), gh, gx,
              store_.g(prefix + ".c1.w"), store_.g(prefix + ".c1.b"));
  for (size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];
  return gx;
}

Tensor ToyModel::adapter_fwd(const std::string& prefix, const Tensor& x,
                             AdapterCache* cache) const {
  Tensor a1 = tanh_fwd(
      conv3x3_fwd(x, store_.p(prefix + ".c.w"), store_.p(prefix + ".c.b")));
  Tensor a2 = tanh_fwd(
      tconv3_fwd(a1, store_.p(prefix + ".t.w"), store_.p(prefix + ".t.b")));
  Tensor att = attention_fwd(a2, store_.p(prefix + ".q.w"),
                             store_.p(prefix + ".k.w"), store_.p(prefix + ".v.w"),
                             store_.p(prefix + ".o.w"), pos_, cfg_.heads,
                             cache ? &cache->att : nullptr);
  Tensor y = conv1x1_fwd(att, store_.p(prefix + ".zout.w"),
                         store_.p(prefix + ".zout.b"));
  for (size_t i = 0; i < y.numel(); ++i) y[i] += x[i];
  if (cache) {
    cache->x = x;
    cache->a1 = std::move(a1);
    cache->a2 = std::move(a2);
    cache->att_out = std::move(att);
  }
  return y;
}

Tensor ToyModel::adapter_bwd(const std::string& prefix,
                             const AdapterCache& cache, const Tensor& gy) {
  Tensor gatt;
  conv1x1_bwd(cache.att_out, store_.p(prefix + ".zout.w"), gy, gatt,
              store_.g(prefix + ".zout.w"), store_.g(prefix + ".zout.b"));
  Tensor ga2;
  attention_bwd(cache.a2, store_.p(prefix + ".q.w"), store_.p(prefix + ".k.w"),
                store_.p(prefix + ".v.w"), store_.p(prefix + ".o.w"),
                cfg_.heads, cache.att, gatt, ga2, store_.g(prefix + ".q.w"),
                store_.g(prefix + ".k.w"), store_.g(prefix + ".v.w"),
                store_.g(prefix + ".o.w"));
  Tensor gu2 = tanh_bwd(cache.a2, ga2);
  Tensor ga1;
  tconv3_bwd(cache.a1, store_.p(prefix + ".t.w"), gu2, ga1,
             store_.g(prefix + ".t.w"), store_.g(prefix + ".t.b"));
  Tensor gu1 = tanh_bwd(cache.a1, ga1);
  Tensor gx;
  conv3x3_bwd(cache.x, store_.p(prefix + ".c.w"), gu1, gx,
              store_.g(prefix + ".c.w"), store_.g(prefix + ".c.b"));
  for (size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];
  return gx;
}

Tensor ToyModel::run(const Tensor& z_t, double t, const ClipData* cond,
                     ForwardCache* cache) const {
  require(z_t.rank() == 4 && z_t.dim(0) == cfg_.clip_frames() &&
              z_t.dim(1) == kLatentChannels && z_t.dim(2) == cfg_.latent_h &&
              z_t.dim(3) == cfg_.latent_w,
          ErrorCode::ShapeMismatch, "latent shape");
  require(std::isfinite(t) && t >= 0.0 && t <= 1.0, ErrorCode::InvalidArgument,
          "t must be in [0,1]");
  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.control = cond != nullptr;
  fc.adapter = adapter_enabled_;
  fc.temb = time_embedding(t);
  fc.z = z_t;

  Tensor x0 = conv3x3_fwd(z_t, store_.p("in.w"), store_.p("in.b"));
  Tensor i1, i2;
  if (cond) {
    Tensor c = encode(*cond, &fc.enc);
    Tensor g0 = x0;
    for (size_t i = 0; i < g0.numel(); ++i) g0[i] += c[i];
    Tensor c1 = res_fwd("ctrl1", g0, fc.temb, &fc.rc1);
    Tensor c2 = res_fwd("ctrl2", c1, fc.temb, &fc.rc2);
    Tensor a1 = adapter_enabled_ ? adapter_fwd("adapter1", c1, &fc.ad1) : c1;
    Tensor a2 = adapter_enabled_ ? adapter_fwd("adapter2", c2, &fc.ad2) : c2;
    i1 = conv1x1_fwd(a1, store_.p("zp1.w"), store_.p("zp1.b"));
    i2 = conv1x1_fwd(a2, store_.p("zp2.w"), store_.p("zp2.b"));
    fc.g0 = std::move(g0);
    fc.c1 = std::move(c1);
    fc.c2 = std::move(c2);
    fc.a1 = std::move(a1);
    fc.a2 = std::move(a2);
  }
  Tensor b1 = res_fwd("base1", x0, fc.temb, &fc.rb1);
  if (cond)
    for (size_t i = 0; i < b1.numel(); ++i) b1[i] += i1[i];
  Tensor b2 = res_fwd("base2", b1, fc.temb, &fc.rb2);
  if (cond)
    for (size_t i = 0; i < b2.numel(); ++i) b2[i] += i2[i];
  fc.x0 = std::move(x0);
  fc.b1 = b1;
  fc.b2 = b2;
  return conv3x3_fwd(b2, store_.p("out.w"), store_.p("out.b"));
}

Tensor ToyModel::forward(const Tensor& z_t, double t, const ClipData& cond,
                         ForwardCache* cache) const {
  return run(z_t, t, &cond, cache);
}

Tensor ToyModel::forward_base(const Tensor& z_t, double t,
                              ForwardCache* cache) const {
  return run(z_t, t, nullptr, cache);
}

void ToyModel::backward(const ForwardCache& fc, const Tensor& gout) {
  Tensor gb2;
  conv3x3_bwd(fc.b2, store_.p("out.w"), gout, gb2, store_.g("out.w"),
              store_.g("out.b"));
  Tensor gb1 = res_bwd("base2", fc.rb2, fc.temb, gb2);
  Tensor gx0 = res_bwd("base1", fc.rb1, fc.temb, gb1);
  if (fc.control) {
    Tensor ga2, ga1;
    conv1x1_bwd(fc.a2, store_.p("zp2.w"), gb2, ga2, store_.g("zp2.w"),
                store_.g("zp2.b"));
    conv1x1_bwd(fc.a1, store_.p("zp1.w"), gb1, ga1, store_.g("zp1.w"),
                store_.g("zp1.b"));
    Tensor gc2 = fc.adapter ? adapter_bwd("adapter2", fc.ad2, ga2) : ga2;
    Tensor gc1 = res_bwd("ctrl2", fc.rc2, fc.temb, gc2);
    Tensor gc1b = fc.adapter ? adapter_bwd("adapter1", fc.ad1, ga1) : ga1;
    for (size_t i = 0; i < gc1.numel(); ++i) gc1[i] += gc1b[i];
    Tensor gg0 = res_bwd("ctrl1", fc.rc1, fc.temb, gc1);
    for (size_t i = 0; i < gx0.numel(); ++i) gx0[i] += gg0[i];
    encode_bwd(fc.enc, gg0);
  }
  Tensor gz;
  conv3x3_bwd(fc.z, store_.p("in.w"), gx0, gz, store_.g("in.w"),
              store_.g("in.b"));
}

namespace {

void hold_clean_frames(Tensor& z, const Tensor& z0, int views, int k) {
  const int F = z.dim(0);
  const size_t stride = z.numel() / size_t(F);
  for (int f = 0; f < F; ++f)
    if (clean_frame(f, views, k))
      std::copy(z0.data.begin() + long(size_t(f) * stride),
                z0.data.begin() + long(size_t(f + 1) * stride),
                z.data.begin() + long(size_t(f) * stride));
}

}  // namespace

TrainStats train(ToyModel& model, const std::vector<ClipData>& clips,
                 const TrainParams& p) {
  require(!clips.empty(), ErrorCode::InvalidArgument, "no training clips");
  require(p.steps > 0, ErrorCode::InvalidArgument, "steps must be positive");
  require(p.lr > 0, ErrorCode::InvalidArgument, "lr must be positive");
  require(p.gamma >= 0, ErrorCode::InvalidArgument, "gamma must not be negative");
  require(p.cond_dropout >= 0 && p.cond_dropout <= 1, ErrorCode::InvalidArgument,
          "dropout must be in [0,1]");
  const ToyConfig& cfg = model.config();
  const int F = cfg.clip_frames();
  require(p.clean_max >= 0 && p.clean_max < cfg.frames,
          ErrorCode::InvalidArgument, "clean_max must leave frames to denoise");

  std::ofstream log;
  if (!p.log_path.empty()) {
    log.open(p.log_path, std::ios::trunc);
    require(log.good(), ErrorCode::IoError, "cannot open log: " + p.log_path);
  }

  Rng rng(p.seed);
  std::vector<double> losses;
  losses.reserve(size_t(p.steps));
  for (int step = 0; step < p.steps; ++step) {
    const ClipData& clip = clips[size_t(step) % clips.size()];
    double t = rng.uniform();
    int k = p.clean_max > 0 ? int(rng.uniform_index(uint64_t(p.clean_max) + 1)) : 0;
    Tensor eps(clip.z0.shape);
    for (double& v : eps.data) v = rng.normal();
    Tensor z_t = rf_interpolate(clip.z0, eps, t);
    hold_clean_frames(z_t, clip.z0, cfg.views, k);
    Tensor target = rf_velocity_target(clip.z0, eps);

    bool drop = rng.uniform() < p.cond_dropout;
    ClipData dropped;
    if (drop) dropped = zeroed_conditions(clip);
    const ClipData& cond = drop ? dropped : clip;

    ForwardCache fc;
    Tensor pred = model.forward(z_t, t, cond, &fc);
    Tensor e = pred;
    for (size_t i = 0; i < e.numel(); ++i) e[i] -= target[i];

    std::vector<uint8_t> clean(static_cast<size_t>(F));
    for (int f = 0; f < F; ++f)
      clean[size_t(f)] = clean_frame(f, cfg.views, k) ? 1 : 0;
    LossGrad lg = masked_diffusion_loss(e, clip.fg, p.gamma, &clean);
    if (!std::isfinite(lg.value))
      fail(ErrorCode::Diverged, "loss is not finite at step " + std::to_string(step));

    model.store().zero_grads();
    model.backward(fc, lg.grad);
    model.store().sgd_step(p.lr, p.trainable);
    losses.push_back(lg.value);

    if (log.is_open()) {
      double fg_se = 0, bg_se = 0;
      size_t fg_n = 0, bg_n = 0;
      const int C = e.dim(1), S = e.dim(2) * e.dim(3);
      for (int f = 0; f < F; ++f) {
        if (clean[size_t(f)]) continue;
        for (int c = 0; c < C; ++c)
          for (int s = 0; s < S; ++s) {
            double d = e.data[(size_t(f) * C + c) * S + s];
            if (clip.fg.data[size_t(f) * size_t(S) + size_t(s)] > 0.5) {
              fg_se += d * d;
              ++fg_n;
            } else {
              bg_se += d * d;
              ++bg_n;
            }
          }
      }
      nlohmann::json line = {{"bg_loss", bg_n ? bg_se / double(bg_n) : 0.0},
                             {"fg_loss", fg_n ? fg_se / double(fg_n) : 0.0},
                             {"loss", lg.value},
                             {"step", step}};
      log << line.dump() << "\n";
    }
  }
  if (log.is_open()) {
    log.flush();
    require(log.good(), ErrorCode::IoError, "log write failed: " + p.log_path);
  }

  auto window_mean = [&](size_t begin, size_t end) {
    double s = 0;
    for (size_t i = begin; i < end; ++i) s += losses[i];
    return s / double(end - begin);
  };
  size_t w = std::min<size_t>(20, losses.size());
  TrainStats stats;
  stats.steps = p.steps;
  stats.initial_loss = window_mean(0, w);
  stats.final_loss = window_mean(losses.size() - w, losses.size());
  return stats;
}

Tensor sample(const ToyModel& model, const ClipData& clip,
              const SampleParams& p) {
  const ToyConfig& cfg = model.config();
  require(p.steps > 0, ErrorCode::InvalidArgument, "steps must be positive");
  require(p.clean >= 0 && p.clean <= cfg.frames, ErrorCode::InvalidArgument,
          "clean frame count out of range");
  Rng rng(p.seed);
  Tensor z(clip.z0.shape);
  for (double& v : z.data) v = rng.normal();
  hold_clean_frames(z, clip.z0, cfg.views, p.clean);

  ClipData uncond = zeroed_conditions(clip);
  auto velocity = [&](const Tensor& zt, double t) {
    Tensor vc = model.forward(zt, t, clip);
    if (p.guidance == 1.0) return vc;
    Tensor vu = model.forward(zt, t, uncond);
    return cfg_combine(vc, vu, p.guidance);
  };
  auto post = [&](Tensor& zt, double) {
    hold_clean_frames(zt, clip.z0, cfg.views, p.clean);
  };
  return rf_euler_sample(z, p.steps, velocity, post);
}

RegionMse mse_by_region(const Tensor& z, const ClipData& clip, int clean,
                        int views) {
  require_same_shape(z, clip.z0, "sample vs reference");
  const int F = z.dim(0), C = z.dim(1), S = z.dim(2) * z.dim(3);
  RegionMse r;
  double fg_se = 0, bg_se = 0;
  for (int f = 0; f < F; ++f) {
    if (clean_frame(f, views, clean)) continue;
    for (int c = 0; c < C; ++c)
      for (int s = 0; s < S; ++s) {
        double d = z.data[(size_t(f) * C + c) * S + s] -
                   clip.z0.data[(size_t(f) * C + c) * S + s];
        if (clip.fg.data[size_t(f) * size_t(S) + size_t(s)] > 0.5) {
          fg_se += d * d;
          ++r.fg_count;
        } else {
          bg_se += d * d;
          ++r.bg_count;
        }
      }
  }
  r.fg = r.fg_count ? fg_se / double(r.fg_count) : 0.0;
  r.bg = r.bg_count ? bg_se / double(r.bg_count) : 0.0;
  return r;
}

std::vector<uint8_t> checkpoint_bytes(const ToyModel& model) {
  const ToyConfig& c = model.config();
  ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u32(uint32_t(c.frames));
  w.u32(uint32_t(c.views));
  w.u32(uint32_t(c.latent_h));
  w.u32(uint32_t(c.latent_w));
  w.u32(uint32_t(c.hidden));
  w.u32(uint32_t(c.planes));
  w.u32(uint32_t(c.heads));
  w.u8(model.adapter_enabled() ? 1 : 0);
  w.u64(c.seed);
  const ParamStore& ps = model.store();
  w.u32(uint32_t(ps.names.size()));
  for (const auto& name : ps.names) {
    const Tensor& t = ps.params.at(name);
    w.str8(name);
    w.u8(uint8_t(t.rank()));
    for (int d = 0; d < t.rank(); ++d) w.u32(uint32_t(t.dim(d)));
    for (double v : t.data) w.f64(v);
  }
  return w.bytes;
}

ToyModel checkpoint_from_bytes(const uint8_t* data, size_t size) {
  std::vector<uint8_t> buf(data, data + size);
  ByteReader r(buf);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, kCheckpointMagic, 4) == 0, ErrorCode::BadMagic,
          "not a checkpoint file");
  uint16_t version = r.u16();
  require(version == kCheckpointVersion, ErrorCode::UnsupportedVersion,
          "unsupported checkpoint version " + std::to_string(version));
  ToyConfig c;
  c.frames = int(r.u32());
  c.views = int(r.u32());
  c.latent_h = int(r.u32());
  c.latent_w = int(r.u32());
  c.hidden = int(r.u32());
  c.planes = int(r.u32());
  c.heads = int(r.u32());
  c.adapter = r.u8() != 0;
  c.seed = r.u64();
  c.validate();
  ToyModel model(c);
  ParamStore& ps = model.store();
  uint32_t n = r.u32();
  require(n == ps.names.size(), ErrorCode::ParseError,
          "checkpoint tensor count mismatch");
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str8();
    require(ps.has(name), ErrorCode::ParseError,
            "unknown checkpoint tensor " + name);
    Tensor& t = ps.p(name);
    int rank = r.u8();
    require(rank == t.rank(), ErrorCode::ParseError,
            "checkpoint rank mismatch for " + name);
    for (int d = 0; d < rank; ++d)
      require(int(r.u32()) == t.dim(d), ErrorCode::ParseError,
              "checkpoint shape mismatch for " + name);
    for (double& v : t.data) v = r.f64();
  }
  require(r.done(), ErrorCode::ParseError, "trailing bytes in checkpoint");
  return model;
}

void save_checkpoint(const ToyModel& model, const std::string& path) {
  write_file_bytes(path, checkpoint_bytes(model));
}

ToyModel load_checkpoint(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return checkpoint_from_bytes(bytes.data(), bytes.size());
}

}  // namespace voxcond
