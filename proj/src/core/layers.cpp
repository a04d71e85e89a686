#include "core/layers.hpp"

#include <cmath>

#include "core/fnv.hpp"

namespace voxcond {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  require(!has(name), ErrorCode::InvalidArgument, "duplicate param " + name);
  names.push_back(name);
  grads[name] = Tensor(init.shape);
  return params[name] = std::move(init);
}

Tensor& ParamStore::p(const std::string& name) {
  auto it = params.find(name);
  require(it != params.end(), ErrorCode::InvalidArgument, "no param " + name);
  return it->second;
}

const Tensor& ParamStore::p(const std::string& name) const {
  auto it = params.find(name);
  require(it != params.end(), ErrorCode::InvalidArgument, "no param " + name);
  return it->second;
}

Tensor& ParamStore::g(const std::string& name) {
  auto it = grads.find(name);
  require(it != grads.end(), ErrorCode::InvalidArgument, "no grad " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
}

void ParamStore::sgd_step(double lr,
                          const std::function<bool(const std::string&)>& trainable) {
  for (const auto& name : names) {
    if (trainable && !trainable(name)) continue;
    Tensor& w = params[name];
    const Tensor& g = grads[name];
    for (size_t i = 0; i < w.numel(); ++i) w[i] -= lr * g[i];
  }
}

uint64_t ParamStore::checksum(const std::string& prefix, bool exclude) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& name : names) {
    bool matches = name.rfind(prefix, 0) == 0;
    if (matches == exclude) continue;
    h = fnv1a64(name.data(), name.size(), h);
    const Tensor& t = params.at(name);
    h = fnv1a64(t.data.data(), t.data.size() * sizeof(double), h);
  }
  return h;
}

Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  double s = 1.0 / std::sqrt(double(fan_in));
  for (double& v : t.data) v = rng.uniform(-s, s);
  return t;
}

Tensor conv3x3_fwd(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int F = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0);
  require(w.rank() == 4 && w.dim(1) == Ci && w.dim(2) == 3 && w.dim(3) == 3,
          ErrorCode::ShapeMismatch, "conv3x3 weight shape");
  require(b.rank() == 1 && b.dim(0) == Co, ErrorCode::ShapeMismatch,
          "conv3x3 bias shape");
  Tensor y({F, Co, H, W});
  for (int f = 0; f < F; ++f)
    for (int co = 0; co < Co; ++co)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double s = b[size_t(co)];
          for (int ci = 0; ci < Ci; ++ci)
            for (int di = -1; di <= 1; ++di) {
              int ii = i + di;
              if (ii < 0 || ii >= H) continue;
              for (int dj = -1; dj <= 1; ++dj) {
                int jj = j + dj;
                if (jj < 0 || jj >= W) continue;
                s += w.at4(co, ci, di + 1, dj + 1) * x.at4(f, ci, ii, jj);
              }
            }
          y.at4(f, co, i, j) = s;
        }
  return y;
}

void conv3x3_bwd(const Tensor& x, const Tensor& w, const Tensor& gout,
                 Tensor& gx, Tensor& gw, Tensor& gb) {
  const int F = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0);
  gx = Tensor(x.shape);
  for (int f = 0; f < F; ++f)
    for (int co = 0; co < Co; ++co)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double go = gout.at4(f, co, i, j);
          gb[size_t(co)] += go;
          for (int ci = 0; ci < Ci; ++ci)
            for (int di = -1; di <= 1; ++di) {
              int ii = i + di;
              if (ii < 0 || ii >= H) continue;
              for (int dj = -1; dj <= 1; ++dj) {
                int jj = j + dj;
                if (jj < 0 || jj >= W) continue;
                gw.at4(co, ci, di + 1, dj + 1) += go * x.at4(f, ci, ii, jj);
                gx.at4(f, ci, ii, jj) += go * w.at4(co, ci, di + 1, dj + 1);
              }
            }
        }
}

Tensor conv1x1_fwd(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int F = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0);
  require(w.rank() == 2 && w.dim(1) == Ci, ErrorCode::ShapeMismatch,
          "conv1x1 weight shape");
  require(b.rank() == 1 && b.dim(0) == Co, ErrorCode::ShapeMismatch,
          "conv1x1 bias shape");
  Tensor y({F, Co, H, W});
  for (int f = 0; f < F; ++f)
    for (int co = 0; co < Co; ++co)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double s = b[size_t(co)];
          for (int ci = 0; ci < Ci; ++ci)
            s += w.at2(co, ci) * x.at4(f, ci, i, j);
          y.at4(f, co, i, j) = s;
        }
  return y;
}

void conv1x1_bwd(const Tensor& x, const Tensor& w, const Tensor& gout,
                 Tensor& gx, Tensor& gw, Tensor& gb) {
  const int F = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0);
  gx = Tensor(x.shape);
  for (int f = 0; f < F; ++f)
    for (int co = 0; co < Co; ++co)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double go = gout.at4(f, co, i, j);
          gb[size_t(co)] += go;
          for (int ci = 0; ci < Ci; ++ci) {
            gw.at2(co, ci) += go * x.at4(f, ci, i, j);
            gx.at4(f, ci, i, j) += go * w.at2(co, ci);
          }
        }
}

Tensor tanh_fwd(const Tensor& x) {
  Tensor y(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Tensor tanh_bwd(const Tensor& y, const Tensor& gout) {
  Tensor gx(y.shape);
  for (size_t i = 0; i < y.numel(); ++i) gx[i] = gout[i] * (1.0 - y[i] * y[i]);
  return gx;
}

Tensor tconv3_fwd(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(w.rank() == 2 && w.dim(0) == C && w.dim(1) == 3,
          ErrorCode::ShapeMismatch, "tconv3 weight shape");
  Tensor y(x.shape);
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double s = b[size_t(c)];
          for (int df = -1; df <= 1; ++df) {
            int ff = f + df;
            if (ff < 0 || ff >= F) continue;
            s += w.at2(c, df + 1) * x.at4(ff, c, i, j);
          }
          y.at4(f, c, i, j) = s;
        }
  return y;
}

void tconv3_bwd(const Tensor& x, const Tensor& w, const Tensor& gout,
                Tensor& gx, Tensor& gw, Tensor& gb) {
  const int F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  gx = Tensor(x.shape);
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double go = gout.at4(f, c, i, j);
          gb[size_t(c)] += go;
          for (int df = -1; df <= 1; ++df) {
            int ff = f + df;
            if (ff < 0 || ff >= F) continue;
            gw.at2(c, df + 1) += go * x.at4(ff, c, i, j);
            gx.at4(ff, c, i, j) += go * w.at2(c, df + 1);
          }
        }
}

namespace {

/* y[f,:,s] = W @ x[f,:,s] for every frame and site. */
Tensor chanmul_fwd(const Tensor& x, const Tensor& w) {
  const int F = x.dim(0), C = x.dim(1), H = x.dim(2), W_ = x.dim(3);
  Tensor y({F, w.dim(0), H, W_});
  for (int f = 0; f < F; ++f)
    for (int co = 0; co < w.dim(0); ++co)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W_; ++j) {
          double s = 0;
          for (int ci = 0; ci < C; ++ci)
            s += w.at2(co, ci) * x.at4(f, ci, i, j);
          y.at4(f, co, i, j) = s;
        }
  return y;
}

void chanmul_bwd(const Tensor& x, const Tensor& w, const Tensor& gout,
                 Tensor& gx_accum, Tensor& gw) {
  const int F = x.dim(0), C = x.dim(1), H = x.dim(2), W_ = x.dim(3);
  for (int f = 0; f < F; ++f)
    for (int co = 0; co < w.dim(0); ++co)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W_; ++j) {
          double go = gout.at4(f, co, i, j);
          for (int ci = 0; ci < C; ++ci) {
            gw.at2(co, ci) += go * x.at4(f, ci, i, j);
            gx_accum.at4(f, ci, i, j) += go * w.at2(co, ci);
          }
        }
}

}  // namespace

Tensor attention_fwd(const Tensor& x, const Tensor& wq, const Tensor& wk,
                     const Tensor& wv, const Tensor& wo, const Tensor& pos,
                     int heads, AttnCache* cache) {
  const int F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(C % heads == 0, ErrorCode::InvalidArgument,
          "heads must divide channels");
  require(pos.rank() == 2 && pos.dim(0) == F && pos.dim(1) == C,
          ErrorCode::ShapeMismatch, "positional tag shape");
  const int dh = C / heads;
  const double scale = 1.0 / std::sqrt(double(dh));
  const int S = H * W;

  Tensor xa = x;
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c)
      for (int s = 0; s < S; ++s)
        xa.data[(size_t(f) * C + c) * S + s] += pos.at2(f, c);

  Tensor q = chanmul_fwd(xa, wq);
  Tensor k = chanmul_fwd(xa, wk);
  Tensor v = chanmul_fwd(x, wv);

  Tensor att({heads, F, F, S});
  Tensor o({F, C, H, W});
  std::vector<double> logits(static_cast<size_t>(F));
  for (int s = 0; s < S; ++s)
    for (int h = 0; h < heads; ++h)
      for (int f = 0; f < F; ++f) {
        double mx = -1e300;
        for (int g = 0; g < F; ++g) {
          double dot = 0;
          for (int d = 0; d < dh; ++d)
            dot += q.data[(size_t(f) * C + h * dh + d) * S + s] *
                   k.data[(size_t(g) * C + h * dh + d) * S + s];
          logits[size_t(g)] = dot * scale;
          mx = std::max(mx, logits[size_t(g)]);
        }
        double z = 0;
        for (int g = 0; g < F; ++g) z += std::exp(logits[size_t(g)] - mx);
        for (int g = 0; g < F; ++g) {
          double a = std::exp(logits[size_t(g)] - mx) / z;
          att.data[((size_t(h) * F + f) * F + g) * S + s] = a;
          for (int d = 0; d < dh; ++d)
            o.data[(size_t(f) * C + h * dh + d) * S + s] +=
                a * v.data[(size_t(g) * C + h * dh + d) * S + s];
        }
      }

  Tensor out = chanmul_fwd(o, wo);
  if (cache) {
    cache->xa = std::move(xa);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->att = std::move(att);
    cache->o = std::move(o);
  }
  return out;
}

void attention_bwd(const Tensor& x, const Tensor& wq, const Tensor& wk,
                   const Tensor& wv, const Tensor& wo, int heads,
                   const AttnCache& cache, const Tensor& gout, Tensor& gx,
                   Tensor& gwq, Tensor& gwk, Tensor& gwv, Tensor& gwo) {
  const int F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int dh = C / heads;
  const double scale = 1.0 / std::sqrt(double(dh));
  const int S = H * W;

  gx = Tensor(x.shape);

  /* out = wo @ o */
  Tensor go(x.shape);
  chanmul_bwd(cache.o, wo, gout, go, gwo);

  Tensor gq(x.shape), gk(x.shape), gv(x.shape);
  std::vector<double> ga(static_cast<size_t>(F)), gl(static_cast<size_t>(F));
  for (int s = 0; s < S; ++s)
    for (int h = 0; h < heads; ++h)
      for (int f = 0; f < F; ++f) {
        /* o[f] = sum_g att[f,g] v[g]; softmax over g */
        double dot_sum = 0;
        for (int g = 0; g < F; ++g) {
          double a = cache.att.data[((size_t(h) * F + f) * F + g) * S + s];
          double gad = 0;
          for (int d = 0; d < dh; ++d) {
            size_t oi = (size_t(f) * C + h * dh + d) * S + s;
            size_t vi = (size_t(g) * C + h * dh + d) * S + s;
            gad += go.data[oi] * cache.v.data[vi];
            gv.data[vi] += a * go.data[oi];
          }
          ga[size_t(g)] = gad;
          dot_sum += gad * a;
        }
        for (int g = 0; g < F; ++g) {
          double a = cache.att.data[((size_t(h) * F + f) * F + g) * S + s];
          gl[size_t(g)] = a * (ga[size_t(g)] - dot_sum);
        }
        for (int g = 0; g < F; ++g) {
          double glg = gl[size_t(g)] * scale;
          for (int d = 0; d < dh; ++d) {
            size_t qi = (size_t(f) * C + h * dh + d) * S + s;
            size_t ki = (size_t(g) * C + h * dh + d) * S + s;
            gq.data[qi] += glg * cache.k.data[ki];
            gk.data[ki] += glg * cache.q.data[qi];
          }
        }
      }

  /* q = wq @ xa, k = wk @ xa, v = wv @ x; pos is constant. */
  Tensor gxa(x.shape);
  chanmul_bwd(cache.xa, wq, gq, gxa, gwq);
  chanmul_bwd(cache.xa, wk, gk, gxa, gwk);
  chanmul_bwd(x, wv, gv, gx, gwv);
  for (size_t i = 0; i < gx.numel(); ++i) gx[i] += gxa[i];
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "nothing to concat");
  const Tensor& first = *parts[0];
  int C = 0;
  for (const Tensor* p : parts) {
    require(p->rank() == 4 && p->dim(0) == first.dim(0) &&
                p->dim(2) == first.dim(2) && p->dim(3) == first.dim(3),
            ErrorCode::ShapeMismatch, "concat shape mismatch");
    C += p->dim(1);
  }
  Tensor out({first.dim(0), C, first.dim(2), first.dim(3)});
  const int S = first.dim(2) * first.dim(3);
  for (int f = 0; f < first.dim(0); ++f) {
    int co = 0;
    for (const Tensor* p : parts)
      for (int c = 0; c < p->dim(1); ++c, ++co)
        for (int s = 0; s < S; ++s)
          out.data[(size_t(f) * C + co) * S + s] =
              p->data[(size_t(f) * p->dim(1) + c) * S + s];
  }
  return out;
}

void split_channels(const Tensor& g, const std::vector<Tensor*>& parts) {
  const int S = g.dim(2) * g.dim(3);
  int C = g.dim(1);
  for (int f = 0; f < g.dim(0); ++f) {
    int co = 0;
    for (Tensor* p : parts)
      for (int c = 0; c < p->dim(1); ++c, ++co)
        for (int s = 0; s < S; ++s)
          p->data[(size_t(f) * p->dim(1) + c) * S + s] =
              g.data[(size_t(f) * C + co) * S + s];
  }
}

}  // namespace voxcond
