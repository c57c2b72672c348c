#include "asyndiff/tiny_net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "asyndiff/rng.hpp"

namespace asyndiff {

namespace {

// y[f] += conv3x3(x[g], w[f][g]) with periodic padding.
void conv3_forward(const Grid3& x, const double* w, const double* b, int f_out,
                   Grid3& y) {
  const int g_in = x.c, h = x.h, wd = x.w;
  for (int f = 0; f < f_out; ++f)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < wd; ++c) {
        double acc = b[f];
        for (int g = 0; g < g_in; ++g) {
          const double* wf = w + ((static_cast<size_t>(f) * g_in + g) * 9);
          for (int dr = 0; dr < 3; ++dr) {
            const int rr = (r + dr - 1 + h) % h;
            for (int dc = 0; dc < 3; ++dc) {
              const int cc = (c + dc - 1 + wd) % wd;
              acc += wf[dr * 3 + dc] * x.at(g, rr, cc);
            }
          }
        }
        y.at(f, r, c) = acc;
      }
}

void conv3_backward(const Grid3& x, const double* w, int f_out,
                    const Grid3& dy, Grid3* dx, double* dw, double* db) {
  const int g_in = x.c, h = x.h, wd = x.w;
  for (int f = 0; f < f_out; ++f)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < wd; ++c) {
        const double g_out = dy.at(f, r, c);
        db[f] += g_out;
        for (int g = 0; g < g_in; ++g) {
          const size_t wbase = (static_cast<size_t>(f) * g_in + g) * 9;
          for (int dr = 0; dr < 3; ++dr) {
            const int rr = (r + dr - 1 + h) % h;
            for (int dc = 0; dc < 3; ++dc) {
              const int cc = (c + dc - 1 + wd) % wd;
              dw[wbase + dr * 3 + dc] += g_out * x.at(g, rr, cc);
              if (dx) dx->at(g, rr, cc) += g_out * w[wbase + dr * 3 + dc];
            }
          }
        }
      }
}

Grid3 tanh_grid(const Grid3& x) {
  Grid3 y(x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) y.v[i] = std::tanh(x.v[i]);
  return y;
}

}  // namespace

void timestep_embedding(double t, double horizon, int dim, double* out) {
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq =
        std::pow(horizon, static_cast<double>(k) / (half - 1)) / horizon;
    const double phase = t * freq * M_PI;
    out[2 * k] = std::sin(phase);
    out[2 * k + 1] = std::cos(phase);
  }
}

TinyCondDenoiser::TinyCondDenoiser(const TinyNetArch& arch) : arch_(arch) {
  if (arch.time_embed % 2 != 0)
    throw std::invalid_argument("time_embed must be even");
  const size_t C = arch.c_in, F = arch.features, E = arch.time_embed;
  const size_t DK = arch.d_key, ET = arch.token_embed, V = arch.vocab;
  size_t off = 0;
  auto add = [&](const char* name, size_t n) {
    blocks_.push_back({name, off, n});
    off += n;
  };
  add("conv_in_w", F * C * 9);
  add("conv_in_b", F);
  add("time_w", F * E);
  add("time_b", F);
  add("rb1_w1", F * F * 9);
  add("rb1_b1", F);
  add("rb1_w2", F * F * 9);
  add("rb1_b2", F);
  add("rb2_w1", F * F * 9);
  add("rb2_b1", F);
  add("rb2_w2", F * F * 9);
  add("rb2_b2", F);
  add("q_w", DK * F);
  add("q_b", DK);
  add("tok_emb", V * ET);
  add("k_w", DK * ET);
  add("v_w", F * ET);
  add("v_b", F);
  add("o_w", F * F);
  add("o_b", F);
  add("out_w", C * F);
  add("out_b", C);
  params_.assign(off, 0.0);
}

size_t TinyCondDenoiser::block_offset(const char* name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b.offset;
  throw std::logic_error(std::string("unknown parameter block: ") + name);
}

void TinyCondDenoiser::init_random(uint64_t seed) {
  CounterRng rng(seed);
  for (const auto& b : blocks_) {
    // fan-in scaled init; biases start at zero
    double scale = 0.0;
    if (b.name.ends_with("_b")) {
      scale = 0.0;
    } else if (b.name == "tok_emb") {
      scale = 1.0;
    } else {
      // weight matrices / conv kernels: rough fan-in from block shape
      size_t fan_in = 1;
      if (b.name.ends_with("_w1") || b.name.ends_with("_w2"))
        fan_in = static_cast<size_t>(arch_.features) * 9;
      else if (b.name == "conv_in_w")
        fan_in = static_cast<size_t>(arch_.c_in) * 9;
      else if (b.name == "time_w")
        fan_in = arch_.time_embed;
      else if (b.name == "q_w" || b.name == "o_w" || b.name == "out_w")
        fan_in = arch_.features;
      else if (b.name == "k_w" || b.name == "v_w")
        fan_in = arch_.token_embed;
      scale = std::sqrt(1.0 / static_cast<double>(fan_in));
    }
    for (size_t i = 0; i < b.count; ++i)
      params_[b.offset + i] = scale * rng.next_normal();
  }
  // damp the residual-branch output convs so the init is near-identity
  for (const char* name : {"rb1_w2", "rb2_w2", "o_w"}) {
    double* p = params_.data() + block_offset(name);
    size_t n = 0;
    for (const auto& b : blocks_)
      if (b.name == name) n = b.count;
    for (size_t i = 0; i < n; ++i) p[i] *= 0.1;
  }
}

DenoiserOutput TinyCondDenoiser::predict(const Grid3& x,
                                         const TimestepField& field,
                                         const std::vector<int>* tokens) const {
  Cache cache;
  return forward(x, field, tokens, cache);
}

DenoiserOutput TinyCondDenoiser::forward(const Grid3& x,
                                         const TimestepField& field,
                                         const std::vector<int>* tokens,
                                         Cache& cache) const {
  const int C = arch_.c_in, F = arch_.features, E = arch_.time_embed;
  const int DK = arch_.d_key, ET = arch_.token_embed;
  const int h = x.h, w = x.w;
  if (x.c != C) throw std::invalid_argument("tiny net: channel mismatch");
  if (field.values.h != h || field.values.w != w)
    throw std::invalid_argument("tiny net: field shape mismatch");
  if (h % arch_.pool != 0 || w % arch_.pool != 0)
    throw std::invalid_argument("tiny net: dims must divide the pool factor");

  static const std::vector<int> kNullTokens = {0};
  const std::vector<int>& toks = tokens ? *tokens : kNullTokens;
  if (toks.empty()) throw std::invalid_argument("tiny net: empty token list");
  for (int id : toks)
    if (id < 0 || id >= arch_.vocab)
      throw std::out_of_range("tiny net: token id outside vocabulary");
  const int n_tok = static_cast<int>(toks.size());

  cache.x = x;
  cache.field = field.values;
  cache.tokens = toks;

  // input conv + per-pixel timestep embedding
  Grid3 h1(F, h, w);
  conv3_forward(x, blk("conv_in_w"), blk("conv_in_b"), F, h1);
  {
    const double* tw = blk("time_w");
    const double* tb = blk("time_b");
    std::vector<double> emb(E);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        timestep_embedding(field.values.at(r, c), arch_.horizon, E, emb.data());
        for (int f = 0; f < F; ++f) {
          double acc = tb[f];
          for (int e = 0; e < E; ++e) acc += tw[f * E + e] * emb[e];
          h1.at(f, r, c) += acc;
        }
      }
  }
  cache.h1 = h1;

  // residual blocks
  auto res_block = [&](const Grid3& in, const char* w1, const char* b1,
                       const char* w2, const char* b2, Grid3& a1_c, Grid3& c1_c,
                       Grid3& a2_c) {
    a1_c = tanh_grid(in);
    c1_c = Grid3(F, h, w);
    conv3_forward(a1_c, blk(w1), blk(b1), F, c1_c);
    a2_c = tanh_grid(c1_c);
    Grid3 out(F, h, w);
    conv3_forward(a2_c, blk(w2), blk(b2), F, out);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += in.v[i];
    return out;
  };
  cache.h2 = res_block(h1, "rb1_w1", "rb1_b1", "rb1_w2", "rb1_b2", cache.rb1_a1,
                       cache.rb1_c1, cache.rb1_a2);
  cache.h3 = res_block(cache.h2, "rb2_w1", "rb2_b1", "rb2_w2", "rb2_b2",
                       cache.rb2_a1, cache.rb2_c1, cache.rb2_a2);

  // cross-attention at quarter resolution
  const int P = arch_.pool;
  const int hp = h / P, wp = w / P;
  const int np = hp * wp;
  Grid3 pooled(F, hp, wp);
  const double inv_pool = 1.0 / (P * P);
  for (int f = 0; f < F; ++f)
    for (int R = 0; R < hp; ++R)
      for (int Cc = 0; Cc < wp; ++Cc) {
        double acc = 0.0;
        for (int dr = 0; dr < P; ++dr)
          for (int dc = 0; dc < P; ++dc)
            acc += cache.h3.at(f, R * P + dr, Cc * P + dc);
        pooled.at(f, R, Cc) = acc * inv_pool;
      }
  cache.pooled = pooled;

  const double* qw = blk("q_w");
  const double* qb = blk("q_b");
  cache.q.assign(static_cast<size_t>(np) * DK, 0.0);
  for (int p = 0; p < np; ++p)
    for (int k = 0; k < DK; ++k) {
      double acc = qb[k];
      for (int f = 0; f < F; ++f)
        acc += qw[k * F + f] * pooled.v[static_cast<size_t>(f) * np + p];
      cache.q[static_cast<size_t>(p) * DK + k] = acc;
    }

  const double* temb = blk("tok_emb");
  const double* kw = blk("k_w");
  const double* vw = blk("v_w");
  const double* vb = blk("v_b");
  cache.tok_e.assign(static_cast<size_t>(n_tok) * ET, 0.0);
  cache.k.assign(static_cast<size_t>(n_tok) * DK, 0.0);
  cache.vv.assign(static_cast<size_t>(n_tok) * F, 0.0);
  for (int j = 0; j < n_tok; ++j) {
    const double* e = temb + static_cast<size_t>(toks[j]) * ET;
    std::memcpy(&cache.tok_e[static_cast<size_t>(j) * ET], e,
                sizeof(double) * ET);
    // no key bias: a bias shared across tokens shifts every logit of a
    // query by the same amount and cancels in the softmax
    for (int k = 0; k < DK; ++k) {
      double acc = 0.0;
      for (int t = 0; t < ET; ++t) acc += kw[k * ET + t] * e[t];
      cache.k[static_cast<size_t>(j) * DK + k] = acc;
    }
    for (int f = 0; f < F; ++f) {
      double acc = vb[f];
      for (int t = 0; t < ET; ++t) acc += vw[f * ET + t] * e[t];
      cache.vv[static_cast<size_t>(j) * F + f] = acc;
    }
  }

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(DK));
  cache.attn.assign(static_cast<size_t>(np) * n_tok, 0.0);
  cache.ctx.assign(static_cast<size_t>(np) * F, 0.0);
  std::vector<double> logits(n_tok);
  for (int p = 0; p < np; ++p) {
    double mx = -1e300;
    for (int j = 0; j < n_tok; ++j) {
      double acc = 0.0;
      for (int k = 0; k < DK; ++k)
        acc += cache.q[static_cast<size_t>(p) * DK + k] *
               cache.k[static_cast<size_t>(j) * DK + k];
      logits[j] = acc * inv_sqrt_dk;
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (int j = 0; j < n_tok; ++j) {
      logits[j] = std::exp(logits[j] - mx);
      z += logits[j];
    }
    for (int j = 0; j < n_tok; ++j) {
      const double a = logits[j] / z;
      cache.attn[static_cast<size_t>(p) * n_tok + j] = a;
      for (int f = 0; f < F; ++f)
        cache.ctx[static_cast<size_t>(p) * F + f] +=
            a * cache.vv[static_cast<size_t>(j) * F + f];
    }
  }

  const double* ow = blk("o_w");
  const double* ob = blk("o_b");
  Grid3 h4 = cache.h3;
  for (int p = 0; p < np; ++p) {
    const int R = p / wp, Cc = p % wp;
    for (int f = 0; f < F; ++f) {
      double acc = ob[f];
      for (int g = 0; g < F; ++g)
        acc += ow[f * F + g] * cache.ctx[static_cast<size_t>(p) * F + g];
      for (int dr = 0; dr < P; ++dr)
        for (int dc = 0; dc < P; ++dc)
          h4.at(f, R * P + dr, Cc * P + dc) += acc;
    }
  }
  cache.h4 = h4;
  cache.a_out = tanh_grid(h4);

  const double* outw = blk("out_w");
  const double* outb = blk("out_b");
  Grid3 eps(C, h, w);
  for (int c = 0; c < C; ++c)
    for (int r = 0; r < h; ++r)
      for (int cc = 0; cc < w; ++cc) {
        double acc = outb[c];
        for (int f = 0; f < F; ++f) acc += outw[c * F + f] * cache.a_out.at(f, r, cc);
        eps.at(c, r, cc) = acc;
      }

  // attention maps, captured before value multiplication
  CrossAttentionMaps maps;
  AttentionLayer layer;
  layer.n_tokens = n_tok;
  layer.h = hp;
  layer.w = wp;
  layer.maps.assign(n_tok, Grid2(hp, wp));
  for (int j = 0; j < n_tok; ++j)
    for (int p = 0; p < np; ++p)
      layer.maps[j].v[p] = cache.attn[static_cast<size_t>(p) * n_tok + j];
  maps.layers.push_back(std::move(layer));

  return {std::move(eps), std::move(maps)};
}

void TinyCondDenoiser::backward(const Cache& cache, const Grid3& d_eps,
                                std::vector<double>* grad) const {
  const int C = arch_.c_in, F = arch_.features, E = arch_.time_embed;
  const int DK = arch_.d_key, ET = arch_.token_embed;
  const int h = cache.x.h, w = cache.x.w;
  const int P = arch_.pool;
  const int hp = h / P, wp = w / P;
  const int np = hp * wp;
  const int n_tok = static_cast<int>(cache.tokens.size());
  if (grad->size() != params_.size())
    throw std::invalid_argument("backward: gradient buffer size mismatch");

  // output projection
  const double* outw = blk("out_w");
  double* d_outw = gblk(grad, "out_w");
  double* d_outb = gblk(grad, "out_b");
  Grid3 d_aout(F, h, w);
  for (int c = 0; c < C; ++c)
    for (int r = 0; r < h; ++r)
      for (int cc = 0; cc < w; ++cc) {
        const double g = d_eps.at(c, r, cc);
        d_outb[c] += g;
        for (int f = 0; f < F; ++f) {
          d_outw[c * F + f] += g * cache.a_out.at(f, r, cc);
          d_aout.at(f, r, cc) += g * outw[c * F + f];
        }
      }

  // tanh before output
  Grid3 d_h4(F, h, w);
  for (size_t i = 0; i < d_h4.size(); ++i) {
    const double y = cache.a_out.v[i];
    d_h4.v[i] = d_aout.v[i] * (1.0 - y * y);
  }

  // attention block (residual): d_h3 gets d_h4 directly plus the pooled path
  Grid3 d_h3 = d_h4;

  // gradient w.r.t. the per-pooled-pixel attention output (sum over block)
  std::vector<double> d_o(static_cast<size_t>(np) * F, 0.0);
  for (int p = 0; p < np; ++p) {
    const int R = p / wp, Cc = p % wp;
    for (int f = 0; f < F; ++f) {
      double acc = 0.0;
      for (int dr = 0; dr < P; ++dr)
        for (int dc = 0; dc < P; ++dc)
          acc += d_h4.at(f, R * P + dr, Cc * P + dc);
      d_o[static_cast<size_t>(p) * F + f] = acc;
    }
  }

  const double* ow = blk("o_w");
  double* d_ow = gblk(grad, "o_w");
  double* d_ob = gblk(grad, "o_b");
  std::vector<double> d_ctx(static_cast<size_t>(np) * F, 0.0);
  for (int p = 0; p < np; ++p)
    for (int f = 0; f < F; ++f) {
      const double g = d_o[static_cast<size_t>(p) * F + f];
      d_ob[f] += g;
      for (int gg = 0; gg < F; ++gg) {
        d_ow[f * F + gg] += g * cache.ctx[static_cast<size_t>(p) * F + gg];
        d_ctx[static_cast<size_t>(p) * F + gg] += g * ow[f * F + gg];
      }
    }

  // attention: ctx[p] = sum_j attn[p][j] * v[j]
  std::vector<double> d_attn(static_cast<size_t>(np) * n_tok, 0.0);
  std::vector<double> d_v(static_cast<size_t>(n_tok) * F, 0.0);
  for (int p = 0; p < np; ++p)
    for (int j = 0; j < n_tok; ++j) {
      const double a = cache.attn[static_cast<size_t>(p) * n_tok + j];
      double acc = 0.0;
      for (int f = 0; f < F; ++f) {
        const double g = d_ctx[static_cast<size_t>(p) * F + f];
        acc += g * cache.vv[static_cast<size_t>(j) * F + f];
        d_v[static_cast<size_t>(j) * F + f] += g * a;
      }
      d_attn[static_cast<size_t>(p) * n_tok + j] = acc;
    }

  // softmax backward -> logits; logits = q . k / sqrt(dk)
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(DK));
  std::vector<double> d_q(static_cast<size_t>(np) * DK, 0.0);
  std::vector<double> d_k(static_cast<size_t>(n_tok) * DK, 0.0);
  for (int p = 0; p < np; ++p) {
    double dot = 0.0;
    for (int j = 0; j < n_tok; ++j)
      dot += d_attn[static_cast<size_t>(p) * n_tok + j] *
             cache.attn[static_cast<size_t>(p) * n_tok + j];
    for (int j = 0; j < n_tok; ++j) {
      const double a = cache.attn[static_cast<size_t>(p) * n_tok + j];
      const double d_logit =
          a * (d_attn[static_cast<size_t>(p) * n_tok + j] - dot) * inv_sqrt_dk;
      for (int k = 0; k < DK; ++k) {
        d_q[static_cast<size_t>(p) * DK + k] +=
            d_logit * cache.k[static_cast<size_t>(j) * DK + k];
        d_k[static_cast<size_t>(j) * DK + k] +=
            d_logit * cache.q[static_cast<size_t>(p) * DK + k];
      }
    }
  }

  // token projections
  const double* kw = blk("k_w");
  const double* vw = blk("v_w");
  double* d_kw = gblk(grad, "k_w");
  double* d_vw = gblk(grad, "v_w");
  double* d_vb = gblk(grad, "v_b");
  double* d_temb = gblk(grad, "tok_emb");
  for (int j = 0; j < n_tok; ++j) {
    const double* e = &cache.tok_e[static_cast<size_t>(j) * ET];
    std::vector<double> d_e(ET, 0.0);
    for (int k = 0; k < DK; ++k) {
      const double g = d_k[static_cast<size_t>(j) * DK + k];
      for (int t = 0; t < ET; ++t) {
        d_kw[k * ET + t] += g * e[t];
        d_e[t] += g * kw[k * ET + t];
      }
    }
    for (int f = 0; f < F; ++f) {
      const double g = d_v[static_cast<size_t>(j) * F + f];
      d_vb[f] += g;
      for (int t = 0; t < ET; ++t) {
        d_vw[f * ET + t] += g * e[t];
        d_e[t] += g * vw[f * ET + t];
      }
    }
    double* d_row = d_temb + static_cast<size_t>(cache.tokens[j]) * ET;
    for (int t = 0; t < ET; ++t) d_row[t] += d_e[t];
  }

  // query projection and pooling
  const double* qw = blk("q_w");
  double* d_qw = gblk(grad, "q_w");
  double* d_qb = gblk(grad, "q_b");
  std::vector<double> d_pooled(static_cast<size_t>(F) * np, 0.0);
  for (int p = 0; p < np; ++p)
    for (int k = 0; k < DK; ++k) {
      const double g = d_q[static_cast<size_t>(p) * DK + k];
      d_qb[k] += g;
      for (int f = 0; f < F; ++f) {
        d_qw[k * F + f] += g * cache.pooled.v[static_cast<size_t>(f) * np + p];
        d_pooled[static_cast<size_t>(f) * np + p] += g * qw[k * F + f];
      }
    }
  const double inv_pool = 1.0 / (P * P);
  for (int f = 0; f < F; ++f)
    for (int p = 0; p < np; ++p) {
      const int R = p / wp, Cc = p % wp;
      const double g = d_pooled[static_cast<size_t>(f) * np + p] * inv_pool;
      for (int dr = 0; dr < P; ++dr)
        for (int dc = 0; dc < P; ++dc)
          d_h3.at(f, R * P + dr, Cc * P + dc) += g;
    }

  // residual blocks backward
  auto res_backward = [&](const Grid3& in, const Grid3& a1, const Grid3& c1,
                          const Grid3& a2, const char* w1, const char* b1,
                          const char* w2, const char* b2, const Grid3& d_out) {
    Grid3 d_a2(F, h, w);
    conv3_backward(a2, blk(w2), F, d_out, &d_a2, gblk(grad, w2),
                   gblk(grad, b2));
    Grid3 d_c1(F, h, w);
    for (size_t i = 0; i < d_c1.size(); ++i) {
      const double y = a2.v[i];
      d_c1.v[i] = d_a2.v[i] * (1.0 - y * y);
    }
    Grid3 d_a1(F, h, w);
    conv3_backward(a1, blk(w1), F, d_c1, &d_a1, gblk(grad, w1),
                   gblk(grad, b1));
    Grid3 d_in = d_out;  // residual path
    for (size_t i = 0; i < d_in.size(); ++i) {
      const double y = a1.v[i];
      d_in.v[i] += d_a1.v[i] * (1.0 - y * y);
    }
    return d_in;
  };

  Grid3 d_h2 = res_backward(cache.h2, cache.rb2_a1, cache.rb2_c1, cache.rb2_a2,
                            "rb2_w1", "rb2_b1", "rb2_w2", "rb2_b2", d_h3);
  Grid3 d_h1 = res_backward(cache.h1, cache.rb1_a1, cache.rb1_c1, cache.rb1_a2,
                            "rb1_w1", "rb1_b1", "rb1_w2", "rb1_b2", d_h2);

  // timestep projection: h1 += time_w * emb(t_p) + time_b, per pixel
  {
    double* d_tw = gblk(grad, "time_w");
    double* d_tb = gblk(grad, "time_b");
    std::vector<double> emb(E);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        timestep_embedding(cache.field.at(r, c), arch_.horizon, E, emb.data());
        for (int f = 0; f < F; ++f) {
          const double g = d_h1.at(f, r, c);
          d_tb[f] += g;
          for (int e = 0; e < E; ++e) d_tw[f * E + e] += g * emb[e];
        }
      }
  }

  // input conv
  conv3_backward(cache.x, blk("conv_in_w"), F, d_h1, nullptr,
                 gblk(grad, "conv_in_w"), gblk(grad, "conv_in_b"));
}

}  // namespace asyndiff
