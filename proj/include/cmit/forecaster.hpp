#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cmit/checkpoint.hpp"
#include "cmit/data.hpp"
#include "cmit/nn.hpp"
#include "cmit/tensor.hpp"

namespace cmit {

struct ModelConfig {
  std::size_t lookback = 14;
  std::size_t horizon = 1;  // one-step-ahead only
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  std::size_t ffn_dim = 64;
  NormKind norm = NormKind::layer;
  double lr = 0.001;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 32;
  std::size_t patience = 20;
  double weight_decay = 0.0;     // optional L2 pull; off by default
  double train_mse_goal = 0.0;   // > 0: stop once the epoch train MSE reaches it
  std::uint64_t seed = 0;
  CloudNormConfig cloud;

  void validate() const;  // throws ConfigError
};

struct TrainLog {
  std::vector<double> train_loss;  // per epoch, standardized space
  std::vector<double> val_loss;    // per epoch; empty when no validation set
  std::size_t best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;  // optimizer updates taken
};

/// Encoder-only transformer for one-step-ahead forecasting: scalar loads are
/// lifted to d_model, summed with sinusoidal position codes, passed through
/// post-norm encoder blocks, and the last position is mapped to one output.
class Forecaster {
 public:
  explicit Forecaster(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  std::size_t parameter_count();
  std::vector<ParamRef> params();

  /// x: [batch, lookback] standardized inputs -> [batch] standardized preds.
  Tensor forward(const Tensor& x, bool training);
  /// Backward from per-output gradients [batch]; returns input grads [batch, lookback].
  Tensor backward(const Tensor& g_pred);

  /// Minimizes MSE with Adam; early-stops on validation stagnation and keeps
  /// the best-validation parameters. `val` may be null.
  TrainLog train(const WindowedDataset& train_windows, const WindowedDataset* val);

  /// Full-set loss in evaluation noise mode.
  double evaluate(const WindowedDataset& windows);

  std::vector<double> predict_standardized(const std::vector<std::vector<double>>& inputs);

  std::vector<CheckpointRecord> export_parameters();
  void import_parameters(const std::vector<CheckpointRecord>& records);

 private:
  Tensor forward_rows(const std::vector<std::vector<double>>& rows,
                      const std::vector<std::size_t>& idx, bool training);

  ModelConfig cfg_;
  Rng init_rng_;   // consumed once, in declaration order, during construction
  Rng noise_rng_;
  Linear embed_;
  std::vector<EncoderBlock> blocks_;
  Linear head_;
  Tensor pos_enc_;  // [lookback, d_model]
  std::size_t cached_batch_ = 0;
};

/// A trained forecaster: config, fitted scaling, parameters, and loss trace.
struct TrainedModel {
  ModelConfig cfg;
  Scaler scaler;
  std::vector<CheckpointRecord> parameters;
  TrainLog log;
};

TrainedModel train_forecaster(const ModelConfig& cfg, const Scaler& scaler,
                              const WindowedDataset& train_windows,
                              const WindowedDataset* val_windows);

/// Predictions in original load units for windows built with the model's
/// lookback and scaler.
std::vector<double> predict(const TrainedModel& model, const WindowedDataset& windows);

}  // namespace cmit
