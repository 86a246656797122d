#include "cmit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmit/error.hpp"

namespace cmit {

namespace {

std::size_t last_dim(const Tensor& x) {
  if (x.rank() == 0) throw ArgumentError("expected tensor with rank >= 1");
  return x.shape().back();
}

std::size_t group_count(const Tensor& x) { return x.size() / last_dim(x); }

}  // namespace

// ---- stateless math ---------------------------------------------------------

Tensor softmax(const Tensor& x) {
  const std::size_t d = last_dim(x);
  const std::size_t n = group_count(x);
  Tensor y(x.shape());
  const double* in = x.data();
  double* out = y.data();
  for (std::size_t g = 0; g < n; ++g, in += d, out += d) {
    double mx = in[0];
    for (std::size_t i = 1; i < d; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      out[i] = std::exp(in[i] - mx);
      sum += out[i];
    }
    for (std::size_t i = 0; i < d; ++i) out[i] /= sum;
  }
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& gy) {
  if (!y.same_shape(gy)) throw ArgumentError("softmax_backward: shape mismatch");
  const std::size_t d = last_dim(y);
  const std::size_t n = group_count(y);
  Tensor gx(y.shape());
  const double* yv = y.data();
  const double* g = gy.data();
  double* out = gx.data();
  for (std::size_t grp = 0; grp < n; ++grp, yv += d, g += d, out += d) {
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += g[i] * yv[i];
    for (std::size_t i = 0; i < d; ++i) out[i] = yv[i] * (g[i] - dot);
  }
  return gx;
}

double mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ArgumentError("mse_loss: shape mismatch");
  if (pred.size() == 0) throw ArgumentError("mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    acc += r * r;
  }
  return acc / static_cast<double>(pred.size());
}

Tensor mse_loss_backward(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ArgumentError("mse_loss_backward: shape mismatch");
  Tensor g(pred.shape());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    g[i] = 2.0 * (pred[i] - target[i]) * inv_n;
  }
  return g;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

double gelu_grad(double x) {
  const double phi_cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double phi_pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return phi_cdf + x * phi_pdf;
}

// ---- Linear -----------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, std::string name)
    : w({in, out}),
      b({out}),
      gw({in, out}),
      gb({out}),
      in_(in),
      out_(out),
      name_(std::move(name)) {
  const double scale = std::sqrt(2.0 / static_cast<double>(in + out));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = scale * rng.normal01();
}

Tensor Linear::forward(const Tensor& x) {
  if (last_dim(x) != in_) throw ArgumentError(name_ + ": input dim mismatch");
  const std::size_t n = group_count(x);
  x_cache_ = x;
  auto out_shape = x.shape();
  out_shape.back() = out_;
  Tensor y(out_shape);
  const double* xv = x.data();
  double* yv = y.data();
  for (std::size_t r = 0; r < n; ++r, xv += in_, yv += out_) {
    for (std::size_t j = 0; j < out_; ++j) yv[j] = b[j];
    for (std::size_t i = 0; i < in_; ++i) {
      const double xi = xv[i];
      const double* wrow = w.data() + i * out_;
      for (std::size_t j = 0; j < out_; ++j) yv[j] += xi * wrow[j];
    }
  }
  return y;
}

Tensor Linear::backward(const Tensor& gy) {
  if (last_dim(gy) != out_) throw ArgumentError(name_ + ": grad dim mismatch");
  const std::size_t n = group_count(gy);
  if (n != group_count(x_cache_)) throw ArgumentError(name_ + ": grad batch mismatch");
  Tensor gx(x_cache_.shape());
  const double* g = gy.data();
  const double* xv = x_cache_.data();
  double* gxv = gx.data();
  for (std::size_t r = 0; r < n; ++r, g += out_, xv += in_, gxv += in_) {
    for (std::size_t j = 0; j < out_; ++j) gb[j] += g[j];
    for (std::size_t i = 0; i < in_; ++i) {
      const double xi = xv[i];
      const double* wrow = w.data() + i * out_;
      double* gwrow = gw.data() + i * out_;
      double acc = 0.0;
      for (std::size_t j = 0; j < out_; ++j) {
        gwrow[j] += xi * g[j];
        acc += wrow[j] * g[j];
      }
      gxv[i] = acc;
    }
  }
  return gx;
}

std::vector<ParamRef> Linear::params() {
  return {{name_ + ".w", &w, &gw}, {name_ + ".b", &b, &gb}};
}

// ---- LayerNorm --------------------------------------------------------------

LayerNorm::LayerNorm(std::size_t dim, bool affine, double eps, std::string name)
    : dim_(dim), affine_(affine), eps_(eps), name_(std::move(name)) {
  if (dim_ < 1) throw ConfigError(name_ + ": dim must be >= 1");
  if (affine_) {
    gamma = Tensor::full({dim_}, 1.0);
    beta = Tensor({dim_});
    ggamma = Tensor({dim_});
    gbeta = Tensor({dim_});
  }
}

Tensor LayerNorm::forward(const Tensor& x, Rng*, bool) {
  if (last_dim(x) != dim_) throw ArgumentError(name_ + ": input dim mismatch");
  const std::size_t n = group_count(x);
  Tensor y(x.shape());
  x_hat_ = Tensor(x.shape());
  inv_std_ = Tensor({n});
  const double* in = x.data();
  double* out = y.data();
  double* xh = x_hat_.data();
  for (std::size_t g = 0; g < n; ++g, in += dim_, out += dim_, xh += dim_) {
    double mean = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) mean += in[i];
    mean /= static_cast<double>(dim_);
    double var = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double d = in[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(dim_);
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[g] = inv;
    for (std::size_t i = 0; i < dim_; ++i) {
      xh[i] = (in[i] - mean) * inv;
      out[i] = affine_ ? gamma[i] * xh[i] + beta[i] : xh[i];
    }
  }
  y.check_finite("layer_norm forward");
  return y;
}

Tensor LayerNorm::backward(const Tensor& gy) {
  if (x_hat_.size() == 0) throw Error(name_ + ": backward before forward");
  if (!gy.same_shape(x_hat_)) throw ArgumentError(name_ + ": grad shape mismatch");
  const std::size_t n = group_count(gy);
  Tensor gx(gy.shape());
  const double* g = gy.data();
  const double* xh = x_hat_.data();
  double* out = gx.data();
  const double inv_d = 1.0 / static_cast<double>(dim_);
  for (std::size_t grp = 0; grp < n; ++grp, g += dim_, xh += dim_, out += dim_) {
    const double inv = inv_std_[grp];
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double gi = affine_ ? g[i] * gamma[i] : g[i];
      sum_g += gi;
      sum_gx += gi * xh[i];
      if (affine_) {
        ggamma[i] += g[i] * xh[i];
        gbeta[i] += g[i];
      }
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      const double gi = affine_ ? g[i] * gamma[i] : g[i];
      out[i] = inv * (gi - inv_d * sum_g - xh[i] * inv_d * sum_gx);
    }
  }
  return gx;
}

std::vector<ParamRef> LayerNorm::params() {
  if (!affine_) return {};
  return {{name_ + ".gamma", &gamma, &ggamma}, {name_ + ".beta", &beta, &gbeta}};
}

// ---- CloudNorm --------------------------------------------------------------

CloudNorm::CloudNorm(std::size_t dim, CloudNormConfig cfg, std::string name)
    : dim_(dim), cfg_(cfg), name_(std::move(name)) {
  if (dim_ < 2) {
    throw ConfigError(name_ + ": needs at least 2 values per reduction group");
  }
  if (cfg_.noise_divisor <= 0.0 || cfg_.epsilon <= 0.0) {
    throw ConfigError(name_ + ": noise_divisor and epsilon must be positive");
  }
  if (cfg_.affine) {
    gamma = Tensor::full({dim_}, 1.0);
    beta = Tensor({dim_});
    ggamma = Tensor({dim_});
    gbeta = Tensor({dim_});
  }
}

Tensor CloudNorm::forward(const Tensor& x, Rng* rng, bool stochastic) {
  if (last_dim(x) != dim_) throw ArgumentError(name_ + ": input dim mismatch");
  if (stochastic && rng == nullptr) {
    throw ArgumentError(name_ + ": stochastic forward needs an rng");
  }
  const std::size_t n = group_count(x);
  x_cache_ = x;
  ex_ = Tensor({n});
  en_prime_ = Tensor(x.shape());
  u_ = Tensor(x.shape());
  Tensor y(x.shape());
  const double* in = x.data();
  double* uv = u_.data();
  double* ev = en_prime_.data();
  double* out = y.data();
  const double inv_d = 1.0 / static_cast<double>(dim_);
  for (std::size_t g = 0; g < n; ++g, in += dim_, uv += dim_, ev += dim_, out += dim_) {
    double lo = in[0], hi = in[0], sum = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      lo = std::min(lo, in[i]);
      hi = std::max(hi, in[i]);
      sum += in[i];
    }
    double ex, en, he;
    if (lo == hi) {
      // Constant group: descriptor is exact, every certainty degree is 1.
      ex = in[0];
      en = 0.0;
      he = 0.0;
    } else {
      ex = sum * inv_d;
      double abs_dev = 0.0, sq_dev = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double d = in[i] - ex;
        abs_dev += std::abs(d);
        sq_dev += d * d;
      }
      en = std::sqrt(std::numbers::pi / 2.0) * abs_dev * inv_d;
      const double s2 = sq_dev * inv_d;
      he = std::sqrt(std::abs(s2 - en * en));
    }
    ex_[g] = ex;
    const double noise_sd = he / cfg_.noise_divisor;
    for (std::size_t i = 0; i < dim_; ++i) {
      double ep = stochastic ? rng->normal(en, noise_sd) : en;
      ep = std::max(ep, cfg_.epsilon);
      ev[i] = ep;
      const double d = in[i] - ex;
      const double u = std::exp(-(d * d) / (2.0 * ep * ep));
      uv[i] = u;
      out[i] = cfg_.affine ? gamma[i] * u + beta[i] : u;
    }
  }
  y.check_finite("cloud_norm forward");
  return y;
}

Tensor CloudNorm::forward_with_cached_stats(const Tensor& x) const {
  if (u_.size() == 0) throw Error(name_ + ": no cached forward state");
  if (!x.same_shape(x_cache_)) throw ArgumentError(name_ + ": shape mismatch");
  const std::size_t n = group_count(x);
  Tensor y(x.shape());
  const double* in = x.data();
  const double* ev = en_prime_.data();
  double* out = y.data();
  for (std::size_t g = 0; g < n; ++g, in += dim_, ev += dim_, out += dim_) {
    const double ex = ex_[g];
    for (std::size_t i = 0; i < dim_; ++i) {
      const double d = in[i] - ex;
      const double u = std::exp(-(d * d) / (2.0 * ev[i] * ev[i]));
      out[i] = cfg_.affine ? gamma[i] * u + beta[i] : u;
    }
  }
  return y;
}

Tensor CloudNorm::backward(const Tensor& gy) {
  if (u_.size() == 0) throw Error(name_ + ": backward before forward");
  if (!gy.same_shape(u_)) throw ArgumentError(name_ + ": grad shape mismatch");
  const std::size_t n = group_count(gy);
  Tensor gx(gy.shape());
  const double* g = gy.data();
  const double* xv = x_cache_.data();
  const double* uv = u_.data();
  const double* ev = en_prime_.data();
  double* out = gx.data();
  for (std::size_t grp = 0; grp < n;
       ++grp, g += dim_, xv += dim_, uv += dim_, ev += dim_, out += dim_) {
    const double ex = ex_[grp];
    for (std::size_t i = 0; i < dim_; ++i) {
      const double gu = cfg_.affine ? g[i] * gamma[i] : g[i];
      out[i] = gu * uv[i] * (-(xv[i] - ex) / (ev[i] * ev[i]));
      if (cfg_.affine) {
        ggamma[i] += g[i] * uv[i];
        gbeta[i] += g[i];
      }
    }
  }
  return gx;
}

std::vector<ParamRef> CloudNorm::params() {
  if (!cfg_.affine) return {};
  return {{name_ + ".gamma", &gamma, &ggamma}, {name_ + ".beta", &beta, &gbeta}};
}

// ---- MultiHeadAttention -----------------------------------------------------

MultiHeadAttention::MultiHeadAttention(std::size_t d_model, std::size_t n_heads,
                                       Rng& rng, std::string name)
    : d_(d_model),
      heads_(n_heads),
      dh_(d_model / n_heads),
      wq_(d_model, d_model, rng, name + ".wq"),
      wk_(d_model, d_model, rng, name + ".wk"),
      wv_(d_model, d_model, rng, name + ".wv"),
      wo_(d_model, d_model, rng, name + ".wo") {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError(name + ": d_model must be divisible by n_heads");
  }
}

Tensor MultiHeadAttention::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(2) != d_) {
    throw ArgumentError("attention: expected [batch, seq, d_model] input");
  }
  const std::size_t B = x.dim(0), S = x.dim(1);
  q_ = wq_.forward(x);
  k_ = wk_.forward(x);
  v_ = wv_.forward(x);
  attn_ = Tensor({B, heads_, S, S});
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
  // scores then row softmax
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads_; ++h) {
      for (std::size_t i = 0; i < S; ++i) {
        const double* qrow = q_.data() + (b * S + i) * d_ + h * dh_;
        double* arow = attn_.data() + ((b * heads_ + h) * S + i) * S;
        for (std::size_t j = 0; j < S; ++j) {
          const double* krow = k_.data() + (b * S + j) * d_ + h * dh_;
          double acc = 0.0;
          for (std::size_t t = 0; t < dh_; ++t) acc += qrow[t] * krow[t];
          arow[j] = acc * scale;
        }
      }
    }
  }
  attn_ = softmax(attn_);
  Tensor ctx({B, S, d_});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads_; ++h) {
      for (std::size_t i = 0; i < S; ++i) {
        const double* arow = attn_.data() + ((b * heads_ + h) * S + i) * S;
        double* crow = ctx.data() + (b * S + i) * d_ + h * dh_;
        for (std::size_t j = 0; j < S; ++j) {
          const double* vrow = v_.data() + (b * S + j) * d_ + h * dh_;
          const double a = arow[j];
          for (std::size_t t = 0; t < dh_; ++t) crow[t] += a * vrow[t];
        }
      }
    }
  }
  return wo_.forward(ctx);
}

Tensor MultiHeadAttention::backward(const Tensor& gy) {
  const std::size_t B = q_.dim(0), S = q_.dim(1);
  Tensor g_ctx = wo_.backward(gy);
  Tensor g_attn({B, heads_, S, S});
  Tensor g_v({B, S, d_});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads_; ++h) {
      for (std::size_t i = 0; i < S; ++i) {
        const double* gcrow = g_ctx.data() + (b * S + i) * d_ + h * dh_;
        const double* arow = attn_.data() + ((b * heads_ + h) * S + i) * S;
        double* garow = g_attn.data() + ((b * heads_ + h) * S + i) * S;
        for (std::size_t j = 0; j < S; ++j) {
          const double* vrow = v_.data() + (b * S + j) * d_ + h * dh_;
          double* gvrow = g_v.data() + (b * S + j) * d_ + h * dh_;
          double acc = 0.0;
          const double a = arow[j];
          for (std::size_t t = 0; t < dh_; ++t) {
            acc += gcrow[t] * vrow[t];
            gvrow[t] += a * gcrow[t];
          }
          garow[j] = acc;
        }
      }
    }
  }
  Tensor g_scores = softmax_backward(attn_, g_attn);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
  Tensor g_q({B, S, d_});
  Tensor g_k({B, S, d_});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads_; ++h) {
      for (std::size_t i = 0; i < S; ++i) {
        const double* gsrow = g_scores.data() + ((b * heads_ + h) * S + i) * S;
        const double* qrow = q_.data() + (b * S + i) * d_ + h * dh_;
        double* gqrow = g_q.data() + (b * S + i) * d_ + h * dh_;
        for (std::size_t j = 0; j < S; ++j) {
          const double gs = gsrow[j] * scale;
          const double* krow = k_.data() + (b * S + j) * d_ + h * dh_;
          double* gkrow = g_k.data() + (b * S + j) * d_ + h * dh_;
          for (std::size_t t = 0; t < dh_; ++t) {
            gqrow[t] += gs * krow[t];
            gkrow[t] += gs * qrow[t];
          }
        }
      }
    }
  }
  Tensor gx = wq_.backward(g_q);
  const Tensor gxk = wk_.backward(g_k);
  const Tensor gxv = wv_.backward(g_v);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gxk[i] + gxv[i];
  return gx;
}

std::vector<ParamRef> MultiHeadAttention::params() {
  std::vector<ParamRef> out;
  for (auto* lin : {&wq_, &wk_, &wv_, &wo_}) {
    auto p = lin->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// ---- FeedForward ------------------------------------------------------------

FeedForward::FeedForward(std::size_t d_model, std::size_t hidden, Rng& rng,
                         std::string name)
    : l1_(d_model, hidden, rng, name + ".l1"), l2_(hidden, d_model, rng, name + ".l2") {}

Tensor FeedForward::forward(const Tensor& x) {
  pre_act_ = l1_.forward(x);
  Tensor h(pre_act_.shape());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = gelu(pre_act_[i]);
  return l2_.forward(h);
}

Tensor FeedForward::backward(const Tensor& gy) {
  Tensor gh = l2_.backward(gy);
  for (std::size_t i = 0; i < gh.size(); ++i) gh[i] *= gelu_grad(pre_act_[i]);
  return l1_.backward(gh);
}

std::vector<ParamRef> FeedForward::params() {
  auto out = l1_.params();
  auto p2 = l2_.params();
  out.insert(out.end(), p2.begin(), p2.end());
  return out;
}

// ---- EncoderBlock -----------------------------------------------------------

std::unique_ptr<NormLayer> make_norm(NormKind kind, std::size_t dim,
                                     const CloudNormConfig& cloud_cfg, bool layer_affine,
                                     const std::string& name) {
  if (kind == NormKind::layer) {
    return std::make_unique<LayerNorm>(dim, layer_affine, 1e-8, name);
  }
  return std::make_unique<CloudNorm>(dim, cloud_cfg, name);
}

EncoderBlock::EncoderBlock(std::size_t d_model, std::size_t n_heads, std::size_t ffn_dim,
                           NormKind kind, const CloudNormConfig& cloud_cfg, Rng& rng,
                           const std::string& name)
    : attn_(d_model, n_heads, rng, name + ".attn"),
      norm1_(make_norm(kind, d_model, cloud_cfg, true, name + ".norm1")),
      ffn_(d_model, ffn_dim, rng, name + ".ffn"),
      norm2_(make_norm(kind, d_model, cloud_cfg, true, name + ".norm2")) {}

Tensor EncoderBlock::forward(const Tensor& x, Rng* rng, bool stochastic) {
  Tensor a = attn_.forward(x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
  Tensor h = norm1_->forward(a, rng, stochastic);
  Tensor f = ffn_.forward(h);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += h[i];
  return norm2_->forward(f, rng, stochastic);
}

Tensor EncoderBlock::backward(const Tensor& gy) {
  Tensor g2 = norm2_->backward(gy);            // grad at (h + ffn(h))
  Tensor gh = ffn_.backward(g2);               // through ffn
  for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += g2[i];  // residual
  Tensor g1 = norm1_->backward(gh);            // grad at (x + attn(x))
  Tensor gx = attn_.backward(g1);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g1[i];
  return gx;
}

std::vector<ParamRef> EncoderBlock::params() {
  std::vector<ParamRef> out = attn_.params();
  for (auto& p : norm1_->params()) out.push_back(p);
  for (auto& p : ffn_.params()) out.push_back(p);
  for (auto& p : norm2_->params()) out.push_back(p);
  return out;
}

// ---- Adam -------------------------------------------------------------------

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<ParamRef>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& p : params) {
    auto& [m, v] = state_[p.value];
    if (m.empty()) {
      m.assign(p.value->size(), 0.0);
      v.assign(p.value->size(), 0.0);
    }
    Tensor& val = *p.value;
    const Tensor& grad = *p.grad;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double g = grad[i];
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient for " + p.name);
      }
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      val[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void Adam::zero_grad(const std::vector<ParamRef>& params) {
  for (const auto& p : params) p.grad->zero();
}

}  // namespace cmit
