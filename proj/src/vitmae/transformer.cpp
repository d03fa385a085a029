// Encoder/decoder forward and hand-written backward passes.
//
// Matrices are row-major with one token per row. Blocks are pre-norm:
//   h' = h + drop(Attn(LN1(h))),  out = h' + drop(MLP(LN2(h')))
// with dropout also applied to attention probabilities. Dropout factors are
// stored in the cache so the backward pass sees the same masks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "pixeluq/errors.hpp"
#include "pixeluq/random.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {
namespace {

constexpr double kNormEps = 1e-6;

template <typename T>
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, T(0)) {}
  T* row(std::size_t i) { return v.data() + i * cols; }
  const T* row(std::size_t i) const { return v.data() + i * cols; }
  T& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  T operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

// Draws inverted-dropout factors (0 or 1/(1-p)) for `count` activations;
// empty when dropout is inactive.
template <typename T>
class DropoutSource {
 public:
  DropoutSource(const DropoutSpec& spec, std::uint64_t seed)
      : rate_(spec.enabled && spec.rate > 0.0 ? spec.rate : 0.0) {
    if (rate_ > 0.0) rng_.emplace(seed);
  }
  bool active() const { return rng_.has_value(); }

  std::vector<T> factors(std::size_t count) {
    if (!active()) return {};
    std::vector<T> f(count);
    const T keep = static_cast<T>(1.0 / (1.0 - rate_));
    for (auto& x : f) x = rng_->uniform() < rate_ ? T(0) : keep;
    return f;
  }

 private:
  double rate_;
  std::optional<Rng> rng_;
};

template <typename T>
void apply_factors(std::vector<T>& values, const std::vector<T>& factors) {
  if (factors.empty()) return;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= factors[i];
}

// ---- linear -------------------------------------------------------------

template <typename T>
Mat<T> linear_forward(const Mat<T>& x, const LinearParams<T>& p) {
  const std::size_t out = p.weight.shape[0], in = p.weight.shape[1];
  Mat<T> y(x.rows, out);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const T* xr = x.row(r);
    T* yr = y.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const T* wo = p.weight.data.data() + o * in;
      T acc = p.bias.data[o];
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc;
    }
  }
  return y;
}

// Accumulates parameter gradients; returns dx when want_dx.
template <typename T>
Mat<T> linear_backward(const Mat<T>& x, const LinearParams<T>& p, const Mat<T>& dy, LinearParams<T>& grad,
                       bool want_dx = true) {
  const std::size_t out = p.weight.shape[0], in = p.weight.shape[1];
  Mat<T> dx;
  if (want_dx) dx = Mat<T>(x.rows, in);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const T* xr = x.row(r);
    const T* dyr = dy.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const T g = dyr[o];
      if (g == T(0)) continue;
      grad.bias.data[o] += g;
      T* gw = grad.weight.data.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gw[i] += g * xr[i];
      if (want_dx) {
        const T* wo = p.weight.data.data() + o * in;
        T* dxr = dx.row(r);
        for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wo[i];
      }
    }
  }
  return dx;
}

// ---- layer norm ---------------------------------------------------------

template <typename T>
struct NormCache {
  Mat<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
Mat<T> layernorm_forward(const Mat<T>& x, const LayerNormParams<T>& p, NormCache<T>& cache) {
  const std::size_t d = x.cols;
  Mat<T> y(x.rows, d);
  cache.xhat = Mat<T>(x.rows, d);
  cache.rstd.assign(x.rows, T(0));
  for (std::size_t r = 0; r < x.rows; ++r) {
    const T* xr = x.row(r);
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const T rstd = static_cast<T>(1.0 / std::sqrt(var + kNormEps));
    cache.rstd[r] = rstd;
    T* xh = cache.xhat.row(r);
    T* yr = y.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      xh[i] = static_cast<T>(xr[i] - mean) * rstd;
      yr[i] = xh[i] * p.scale.data[i] + p.offset.data[i];
    }
  }
  return y;
}

// Adds the input gradient into dx.
template <typename T>
void layernorm_backward(const Mat<T>& dy, const LayerNormParams<T>& p, const NormCache<T>& cache,
                        LayerNormParams<T>& grad, Mat<T>& dx) {
  const std::size_t d = dy.cols;
  std::vector<T> dxhat(d);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const T* dyr = dy.row(r);
    const T* xh = cache.xhat.row(r);
    T mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (std::size_t i = 0; i < d; ++i) {
      grad.scale.data[i] += dyr[i] * xh[i];
      grad.offset.data[i] += dyr[i];
      dxhat[i] = dyr[i] * p.scale.data[i];
      mean_dxhat += dxhat[i];
      mean_dxhat_xhat += dxhat[i] * xh[i];
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    T* dxr = dx.row(r);
    for (std::size_t i = 0; i < d; ++i) dxr[i] += cache.rstd[r] * (dxhat[i] - mean_dxhat - xh[i] * mean_dxhat_xhat);
  }
}

// ---- GELU (erf form) ----------------------------------------------------

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(T(-0.5) * x * x) * static_cast<T>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + x * pdf;
}

// ---- transformer block --------------------------------------------------

template <typename T>
struct BlockCache {
  NormCache<T> attn_norm;
  Mat<T> a;           // LN1(h)
  Mat<T> q, k, v;
  std::vector<T> probs;         // [heads][n][n], before dropout
  std::vector<T> probs_factor;  // dropout factors on probabilities
  Mat<T> attn_out;              // heads concatenated
  std::vector<T> attn_proj_factor;
  Mat<T> mid;  // residual stream after the attention sublayer
  NormCache<T> mlp_norm;
  Mat<T> b;  // LN2(mid)
  Mat<T> pre_act;
  Mat<T> act;
  std::vector<T> mlp_factor;
};

template <typename T>
Mat<T> block_forward(const BlockParams<T>& p, const Mat<T>& h, std::size_t heads, DropoutSource<T>& drop,
                     BlockCache<T>& c) {
  const std::size_t n = h.rows, dim = h.cols, dh = dim / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  c.a = layernorm_forward(h, p.attn_norm, c.attn_norm);
  c.q = linear_forward(c.a, p.query);
  c.k = linear_forward(c.a, p.key);
  c.v = linear_forward(c.a, p.value);

  c.probs.assign(heads * n * n, T(0));
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t i = 0; i < n; ++i) {
      T* row = c.probs.data() + (hd * n + i) * n;
      const T* qi = c.q.row(i) + off;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        const T* kj = c.k.row(j) + off;
        T s = 0;
        for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
        row[j] = s * scale;
        mx = std::max(mx, row[j]);
      }
      T sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    }
  }
  c.probs_factor = drop.factors(c.probs.size());

  c.attn_out = Mat<T>(n, dim);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (hd * n + i) * n;
      T* oi = c.attn_out.row(i) + off;
      for (std::size_t j = 0; j < n; ++j) {
        T pij = c.probs[base + j];
        if (!c.probs_factor.empty()) pij *= c.probs_factor[base + j];
        if (pij == T(0)) continue;
        const T* vj = c.v.row(j) + off;
        for (std::size_t d = 0; d < dh; ++d) oi[d] += pij * vj[d];
      }
    }
  }

  Mat<T> y = linear_forward(c.attn_out, p.output);
  c.attn_proj_factor = drop.factors(y.v.size());
  apply_factors(y.v, c.attn_proj_factor);
  c.mid = h;
  for (std::size_t i = 0; i < c.mid.v.size(); ++i) c.mid.v[i] += y.v[i];

  c.b = layernorm_forward(c.mid, p.mlp_norm, c.mlp_norm);
  c.pre_act = linear_forward(c.b, p.mlp_in);
  c.act = c.pre_act;
  for (auto& x : c.act.v) x = gelu(x);
  Mat<T> m = linear_forward(c.act, p.mlp_out);
  c.mlp_factor = drop.factors(m.v.size());
  apply_factors(m.v, c.mlp_factor);

  Mat<T> out = c.mid;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += m.v[i];
  return out;
}

// Returns d(input) given d(output).
template <typename T>
Mat<T> block_backward(const BlockParams<T>& p, const Mat<T>& h, std::size_t heads, const BlockCache<T>& c,
                      const Mat<T>& dout, BlockParams<T>& g) {
  const std::size_t n = h.rows, dim = h.cols, dh = dim / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  // MLP sublayer
  Mat<T> dmid = dout;
  Mat<T> dm = dout;
  apply_factors(dm.v, c.mlp_factor);
  Mat<T> dact = linear_backward(c.act, p.mlp_out, dm, g.mlp_out);
  for (std::size_t i = 0; i < dact.v.size(); ++i) dact.v[i] *= gelu_grad(c.pre_act.v[i]);
  Mat<T> db = linear_backward(c.b, p.mlp_in, dact, g.mlp_in);
  layernorm_backward(db, p.mlp_norm, c.mlp_norm, g.mlp_norm, dmid);

  // attention sublayer
  Mat<T> dh_in = dmid;
  Mat<T> dy = dmid;
  apply_factors(dy.v, c.attn_proj_factor);
  Mat<T> dattn = linear_backward(c.attn_out, p.output, dy, g.output);

  Mat<T> dq(n, dim), dk(n, dim), dv(n, dim);
  std::vector<T> dp(n);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (hd * n + i) * n;
      const T* doi = dattn.row(i) + off;
      // dP'_ij = dO_i . v_j ; dv_j += P'_ij dO_i
      for (std::size_t j = 0; j < n; ++j) {
        const T* vj = c.v.row(j) + off;
        T s = 0;
        for (std::size_t d = 0; d < dh; ++d) s += doi[d] * vj[d];
        T pij = c.probs[base + j];
        T fac = c.probs_factor.empty() ? T(1) : c.probs_factor[base + j];
        dp[j] = s * fac;
        const T pdrop = pij * fac;
        if (pdrop != T(0)) {
          T* dvj = dv.row(j) + off;
          for (std::size_t d = 0; d < dh; ++d) dvj[d] += pdrop * doi[d];
        }
      }
      // softmax backward
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += dp[j] * c.probs[base + j];
      const T* qi = c.q.row(i) + off;
      T* dqi = dq.row(i) + off;
      for (std::size_t j = 0; j < n; ++j) {
        const T ds = c.probs[base + j] * (dp[j] - dot) * scale;
        if (ds == T(0)) continue;
        const T* kj = c.k.row(j) + off;
        T* dkj = dk.row(j) + off;
        for (std::size_t d = 0; d < dh; ++d) {
          dqi[d] += ds * kj[d];
          dkj[d] += ds * qi[d];
        }
      }
    }
  }

  Mat<T> da = linear_backward(c.a, p.query, dq, g.query);
  Mat<T> da_k = linear_backward(c.a, p.key, dk, g.key);
  Mat<T> da_v = linear_backward(c.a, p.value, dv, g.value);
  for (std::size_t i = 0; i < da.v.size(); ++i) da.v[i] += da_k.v[i] + da_v.v[i];
  layernorm_backward(da, p.attn_norm, c.attn_norm, g.attn_norm, dh_in);
  return dh_in;
}

// ---- full model ---------------------------------------------------------

template <typename T>
struct ModelCache {
  std::vector<std::size_t> visible;         // patch index of encoder token t+1
  std::vector<std::ptrdiff_t> token_of;     // encoder token per patch, -1 if masked
  Mat<T> patches_in;                        // visible patch pixels
  Mat<T> enc_in;
  std::vector<Mat<T>> enc_inputs;  // input of each encoder block
  std::vector<BlockCache<T>> enc;
  Mat<T> enc_last;
  NormCache<T> enc_norm;
  Mat<T> enc_out;
  Mat<T> dec_proj;
  std::vector<Mat<T>> dec_inputs;
  std::vector<BlockCache<T>> dec;
  Mat<T> dec_last;
  NormCache<T> dec_norm;
  Mat<T> dec_out;  // [N, decoder_dim], CLS row dropped
  Mat<T> pred;     // [N, patch_dim]
};

template <typename T>
void check_inputs(const ModelConfig& cfg, const PatchSequence& seq, const PatchMask& mask) {
  if (seq.patch_size != cfg.patch_size || seq.channels != cfg.channels)
    throw GeometryError("patch geometry " + std::to_string(seq.patch_size) + "x" + std::to_string(seq.channels) +
                        " does not match the model (" + std::to_string(cfg.patch_size) + "x" +
                        std::to_string(cfg.channels) + ")");
  if (seq.num_patches == 0) throw EmptyInputError("empty patch sequence");
  if (seq.num_patches > cfg.max_patches)
    throw GeometryError("sequence of " + std::to_string(seq.num_patches) + " patches exceeds max_patches " +
                        std::to_string(cfg.max_patches));
  if (seq.data.size() != seq.num_patches * seq.patch_dim()) throw GeometryError("patch buffer size mismatch");
  if (mask.size() != seq.num_patches)
    throw GeometryError("mask length " + std::to_string(mask.size()) + " differs from sequence length " +
                        std::to_string(seq.num_patches));
}

template <typename T>
void model_forward(const BasicWeights<T>& w, const PatchSequence& seq, const PatchMask& mask, DropoutSource<T>& drop,
                   ModelCache<T>& c) {
  const ModelConfig& cfg = w.config;
  const std::size_t N = seq.num_patches, D = cfg.embed_dim, Dd = cfg.decoder_dim, pd = cfg.patch_dim();

  c.visible.clear();
  c.token_of.assign(N, -1);
  for (std::size_t i = 0; i < N; ++i)
    if (!mask.masked(i)) {
      c.token_of[i] = static_cast<std::ptrdiff_t>(c.visible.size() + 1);
      c.visible.push_back(i);
    }
  const std::size_t V = c.visible.size(), n = V + 1;

  c.patches_in = Mat<T>(V, pd);
  for (std::size_t t = 0; t < V; ++t) {
    const auto src = seq.patch(c.visible[t]);
    std::transform(src.begin(), src.end(), c.patches_in.row(t), [](float x) { return static_cast<T>(x); });
  }
  const Mat<T> projected = linear_forward(c.patches_in, w.patch_projection);
  c.enc_in = Mat<T>(n, D);
  for (std::size_t d = 0; d < D; ++d) c.enc_in(0, d) = w.cls_embedding.data[d] + w.positional_embeddings.data[d];
  for (std::size_t t = 0; t < V; ++t) {
    const T* pos = w.positional_embeddings.data.data() + (c.visible[t] + 1) * D;
    for (std::size_t d = 0; d < D; ++d) c.enc_in(t + 1, d) = projected(t, d) + pos[d];
  }

  c.enc.resize(cfg.num_layers);
  c.enc_inputs.resize(cfg.num_layers);
  Mat<T> h = c.enc_in;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    c.enc_inputs[l] = h;
    h = block_forward(w.encoder[l], h, cfg.num_heads, drop, c.enc[l]);
  }
  c.enc_last = h;
  c.enc_out = layernorm_forward(h, w.encoder_norm, c.enc_norm);

  // decoder sees every position; masked ones get the mask embedding
  c.dec_proj = linear_forward(c.enc_out, w.decoder_projection);
  Mat<T> z(N + 1, Dd);
  for (std::size_t r = 0; r <= N; ++r) {
    const T* src = nullptr;
    if (r == 0)
      src = c.dec_proj.row(0);
    else if (c.token_of[r - 1] >= 0)
      src = c.dec_proj.row(static_cast<std::size_t>(c.token_of[r - 1]));
    else
      src = w.mask_embedding.data.data();
    const T* pos = w.decoder_positional_embeddings.data.data() + r * Dd;
    for (std::size_t d = 0; d < Dd; ++d) z(r, d) = src[d] + pos[d];
  }

  c.dec.resize(cfg.decoder_layers);
  c.dec_inputs.resize(cfg.decoder_layers);
  for (std::size_t l = 0; l < cfg.decoder_layers; ++l) {
    c.dec_inputs[l] = z;
    z = block_forward(w.decoder[l], z, cfg.num_heads, drop, c.dec[l]);
  }
  c.dec_last = z;
  Mat<T> normed = layernorm_forward(z, w.decoder_norm, c.dec_norm);
  c.dec_out = Mat<T>(N, Dd);
  std::copy(normed.v.begin() + static_cast<std::ptrdiff_t>(Dd), normed.v.end(), c.dec_out.v.begin());
  c.pred = linear_forward(c.dec_out, w.reconstruction_head);
  (void)pd;
}

template <typename T>
void model_backward(const BasicWeights<T>& w, const ModelCache<T>& c, const Mat<T>& dpred, BasicWeights<T>& g) {
  const ModelConfig& cfg = w.config;
  const std::size_t N = c.token_of.size(), D = cfg.embed_dim, Dd = cfg.decoder_dim;
  const std::size_t V = c.visible.size();

  Mat<T> ddec_out = linear_backward(c.dec_out, w.reconstruction_head, dpred, g.reconstruction_head);
  Mat<T> dnormed(N + 1, Dd);
  std::copy(ddec_out.v.begin(), ddec_out.v.end(), dnormed.v.begin() + static_cast<std::ptrdiff_t>(Dd));
  Mat<T> dz(N + 1, Dd);
  layernorm_backward(dnormed, w.decoder_norm, c.dec_norm, g.decoder_norm, dz);
  for (std::size_t l = cfg.decoder_layers; l-- > 0;)
    dz = block_backward(w.decoder[l], c.dec_inputs[l], cfg.num_heads, c.dec[l], dz, g.decoder[l]);

  Mat<T> ddec_proj(V + 1, Dd);
  for (std::size_t r = 0; r <= N; ++r) {
    const T* dzr = dz.row(r);
    T* dpos = g.decoder_positional_embeddings.data.data() + r * Dd;
    T* dst = nullptr;
    if (r == 0)
      dst = ddec_proj.row(0);
    else if (c.token_of[r - 1] >= 0)
      dst = ddec_proj.row(static_cast<std::size_t>(c.token_of[r - 1]));
    else
      dst = g.mask_embedding.data.data();
    for (std::size_t d = 0; d < Dd; ++d) {
      dpos[d] += dzr[d];
      dst[d] += dzr[d];
    }
  }

  Mat<T> denc_out = linear_backward(c.enc_out, w.decoder_projection, ddec_proj, g.decoder_projection);
  Mat<T> dh(V + 1, D);
  layernorm_backward(denc_out, w.encoder_norm, c.enc_norm, g.encoder_norm, dh);
  for (std::size_t l = cfg.num_layers; l-- > 0;)
    dh = block_backward(w.encoder[l], c.enc_inputs[l], cfg.num_heads, c.enc[l], dh, g.encoder[l]);

  for (std::size_t d = 0; d < D; ++d) {
    g.cls_embedding.data[d] += dh(0, d);
    g.positional_embeddings.data[d] += dh(0, d);
  }
  Mat<T> dproj(V, D);
  for (std::size_t t = 0; t < V; ++t) {
    T* dpos = g.positional_embeddings.data.data() + (c.visible[t] + 1) * D;
    for (std::size_t d = 0; d < D; ++d) {
      dpos[d] += dh(t + 1, d);
      dproj(t, d) = dh(t + 1, d);
    }
  }
  linear_backward(c.patches_in, w.patch_projection, dproj, g.patch_projection, false);
}

template <typename T>
void check_finite(const BasicWeights<T>& w) {
  w.visit([](const std::string& name, ParamKind, const Tensor<T>& t) {
    for (T v : t.data)
      if (!std::isfinite(v)) throw NumericsError("non-finite value in weight tensor " + name);
  });
}

}  // namespace

ForwardOutput forward(const ModelWeights& w, const PatchSequence& seq, const PatchMask& mask,
                      const DropoutSpec& dropout) {
  check_inputs<float>(w.config, seq, mask);
  check_finite(w);
  if (dropout.enabled && !(dropout.rate >= 0.0 && dropout.rate < 1.0))
    throw ConfigError("dropout rate must lie in [0, 1)");

  DropoutSource<float> drop(dropout, dropout.pass_seed);
  ModelCache<float> c;
  model_forward(w, seq, mask, drop, c);

  const ModelConfig& cfg = w.config;
  ForwardOutput out;
  PatchSequence pred_seq{seq.patch_size, seq.channels, seq.num_patches, std::move(c.pred.v)};
  out.pred_pixels = patches_to_image(pred_seq);

  AttentionTensor& a = out.attention;
  a.layers = cfg.num_layers;
  a.heads = cfg.num_heads;
  a.tokens = c.visible.size() + 1;
  a.token_patch.push_back(-1);
  for (auto i : c.visible) a.token_patch.push_back(static_cast<std::ptrdiff_t>(i));
  a.weights.reserve(a.layers * a.heads * a.tokens * a.tokens);
  for (const auto& blk : c.enc) a.weights.insert(a.weights.end(), blk.probs.begin(), blk.probs.end());

  out.cls_vector.assign(c.enc_out.row(0), c.enc_out.row(0) + cfg.embed_dim);
  out.first_attention_residual = std::move(c.enc.front().mid.v);
  return out;
}

template <typename T>
double masked_reconstruction_loss(const BasicWeights<T>& w, std::span<const TrainExample> batch,
                                  const DropoutSpec& dropout, BasicWeights<T>* grad, double visible_weight) {
  if (batch.empty()) throw EmptyInputError("empty training batch");
  if (!(visible_weight >= 0.0) || !std::isfinite(visible_weight))
    throw ConfigError("visible_weight must be finite and non-negative");
  double total_weight = 0.0;
  for (const auto& ex : batch) {
    check_inputs<T>(w.config, ex.patches, ex.mask);
    const std::size_t masked = ex.mask.masked_count();
    total_weight += static_cast<double>(masked * ex.patches.patch_dim());
    if (visible_weight > 0.0)
      total_weight += visible_weight * static_cast<double>((ex.patches.num_patches - masked) * ex.patches.patch_dim());
  }
  if (total_weight == 0.0) return 0.0;
  const double norm = 1.0 / total_weight;

  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    if (visible_weight == 0.0 && ex.mask.masked_count() == 0) continue;
    DropoutSource<T> drop(dropout, mix_seed(dropout.pass_seed, b));
    ModelCache<T> c;
    model_forward(w, ex.patches, ex.mask, drop, c);
    Mat<T> dpred(c.pred.rows, c.pred.cols);
    for (std::size_t i = 0; i < ex.patches.num_patches; ++i) {
      const double weight = ex.mask.masked(i) ? 1.0 : visible_weight;
      if (weight == 0.0) continue;
      const auto target = ex.patches.patch(i);
      const T* pr = c.pred.row(i);
      T* dr = dpred.row(i);
      for (std::size_t k = 0; k < target.size(); ++k) {
        const double diff = static_cast<double>(pr[k]) - static_cast<double>(target[k]);
        loss += weight * diff * diff;
        dr[k] = static_cast<T>(2.0 * weight * diff * norm);
      }
    }
    if (grad) model_backward(w, c, dpred, *grad);
  }
  return loss * norm;
}

template double masked_reconstruction_loss<float>(const BasicWeights<float>&, std::span<const TrainExample>,
                                                  const DropoutSpec&, BasicWeights<float>*, double);
template double masked_reconstruction_loss<double>(const BasicWeights<double>&, std::span<const TrainExample>,
                                                   const DropoutSpec&, BasicWeights<double>*, double);

}  // namespace pixeluq
