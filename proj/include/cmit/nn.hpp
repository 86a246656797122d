#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmit/rng.hpp"
#include "cmit/tensor.hpp"

namespace cmit {

/// Named view of one parameter tensor and its gradient (same shape).
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// ---- stateless math -------------------------------------------------------

/// Row-wise softmax over the last axis, numerically stabilized.
Tensor softmax(const Tensor& x);

/// Backward of softmax given its output y and upstream gradient gy.
Tensor softmax_backward(const Tensor& y, const Tensor& gy);

/// Mean squared error over all entries.
double mse_loss(const Tensor& pred, const Tensor& target);
Tensor mse_loss_backward(const Tensor& pred, const Tensor& target);

double gelu(double x);
double gelu_grad(double x);

// ---- layers ----------------------------------------------------------------

/// Affine map on the last axis: [..., in] -> [..., out].
class Linear {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng, std::string name);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  std::vector<ParamRef> params();

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

  Tensor w;  // [in, out]
  Tensor b;  // [out]
  Tensor gw;
  Tensor gb;

 private:
  std::size_t in_;
  std::size_t out_;
  std::string name_;
  Tensor x_cache_;
};

/// Common surface of the two normalization layers so encoder blocks can swap
/// one for the other at identical call sites.
class NormLayer {
 public:
  virtual ~NormLayer() = default;
  virtual Tensor forward(const Tensor& x, Rng* rng, bool stochastic) = 0;
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual std::vector<ParamRef> params() = 0;
};

/// Standard layer normalization over the last axis with optional affine.
class LayerNorm final : public NormLayer {
 public:
  explicit LayerNorm(std::size_t dim, bool affine = true, double eps = 1e-8,
                     std::string name = "layer_norm");

  Tensor forward(const Tensor& x, Rng* rng = nullptr, bool stochastic = false) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<ParamRef> params() override;

  Tensor gamma;  // [dim], present iff affine
  Tensor beta;
  Tensor ggamma;
  Tensor gbeta;

 private:
  std::size_t dim_;
  bool affine_;
  double eps_;
  std::string name_;
  Tensor x_hat_;     // cached normalized input
  Tensor inv_std_;   // per group
};

struct CloudNormConfig {
  double noise_divisor = 100.0;
  bool train_stochastic = true;
  bool eval_stochastic = false;
  double epsilon = 1e-8;
  bool affine = false;
};

/// Membership normalization over the last axis: each group of d values is
/// summarized by a concept descriptor via the reverse generator, and every
/// entry is replaced by its certainty degree under a per-entry entropy
/// realization Normal(en, (he/noise_divisor)^2). Outputs lie in (0, 1].
///
/// Gradient contract: the group statistics and entropy realizations are
/// treated as constants; backward differentiates only the explicit entry in
/// the numerator. forward_with_cached_stats exposes exactly that function so
/// finite-difference checks target what backward computes.
class CloudNorm final : public NormLayer {
 public:
  CloudNorm(std::size_t dim, CloudNormConfig cfg, std::string name = "cloud_norm");

  Tensor forward(const Tensor& x, Rng* rng, bool stochastic) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<ParamRef> params() override;

  /// Forward recomputed with the stats cached by the last forward() call.
  Tensor forward_with_cached_stats(const Tensor& x) const;

  const CloudNormConfig& config() const { return cfg_; }

  Tensor gamma;  // [dim], present iff cfg.affine
  Tensor beta;
  Tensor ggamma;
  Tensor gbeta;

 private:
  std::size_t dim_;
  CloudNormConfig cfg_;
  std::string name_;
  Tensor x_cache_;
  Tensor ex_;        // per group
  Tensor en_prime_;  // per entry
  Tensor u_;         // per entry
};

/// Standard multi-head self-attention, no masking (encoder use).
class MultiHeadAttention {
 public:
  MultiHeadAttention(std::size_t d_model, std::size_t n_heads, Rng& rng,
                     std::string name = "attn");

  Tensor forward(const Tensor& x);  // [B, S, D] -> [B, S, D]
  Tensor backward(const Tensor& gy);
  std::vector<ParamRef> params();

 private:
  std::size_t d_;
  std::size_t heads_;
  std::size_t dh_;
  Linear wq_;
  Linear wk_;
  Linear wv_;
  Linear wo_;
  Tensor q_, k_, v_;  // [B, S, D] caches
  Tensor attn_;       // [B, H, S, S]
};

/// Position-wise two-layer GELU network.
class FeedForward {
 public:
  FeedForward(std::size_t d_model, std::size_t hidden, Rng& rng,
              std::string name = "ffn");

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  std::vector<ParamRef> params();

 private:
  Linear l1_;
  Linear l2_;
  Tensor pre_act_;
};

enum class NormKind { layer, cloud };

std::unique_ptr<NormLayer> make_norm(NormKind kind, std::size_t dim,
                                     const CloudNormConfig& cloud_cfg, bool layer_affine,
                                     const std::string& name);

/// Post-norm encoder block: x -> norm1(x + attn(x)) -> norm2(h + ffn(h)).
class EncoderBlock {
 public:
  EncoderBlock(std::size_t d_model, std::size_t n_heads, std::size_t ffn_dim,
               NormKind kind, const CloudNormConfig& cloud_cfg, Rng& rng,
               const std::string& name);

  Tensor forward(const Tensor& x, Rng* rng, bool stochastic);
  Tensor backward(const Tensor& gy);
  std::vector<ParamRef> params();

 private:
  MultiHeadAttention attn_;
  std::unique_ptr<NormLayer> norm1_;
  FeedForward ffn_;
  std::unique_ptr<NormLayer> norm2_;
};

// ---- optimizer --------------------------------------------------------------

/// Adam with bias correction. State is keyed by parameter identity; the step
/// counter advances on every step() call.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(const std::vector<ParamRef>& params);
  static void zero_grad(const std::vector<ParamRef>& params);
  std::int64_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<const Tensor*, std::pair<std::vector<double>, std::vector<double>>>
      state_;
};

}  // namespace cmit
