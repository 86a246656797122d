#include "cmit/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmit/error.hpp"

namespace cmit {

void ModelConfig::validate() const {
  if (lookback < 2) throw ConfigError("model: lookback must be >= 2");
  if (horizon != 1) throw ConfigError("model: only horizon 1 is supported");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("model: d_model must be a positive multiple of n_heads");
  }
  if (n_layers == 0 || ffn_dim == 0) throw ConfigError("model: zero-sized layers");
  if (lr <= 0.0) throw ConfigError("model: learning rate must be positive");
  if (batch_size == 0) throw ConfigError("model: batch_size must be >= 1");
  if (norm == NormKind::cloud && d_model < 2) {
    throw ConfigError("model: cloud normalization needs d_model >= 2");
  }
}

namespace {

Tensor sinusoidal_encoding(std::size_t positions, std::size_t d_model) {
  Tensor pe({positions, d_model});
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d_model) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

}  // namespace

namespace {

std::vector<EncoderBlock> make_blocks(const ModelConfig& cfg, Rng& rng) {
  std::vector<EncoderBlock> blocks;
  blocks.reserve(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    blocks.emplace_back(cfg.d_model, cfg.n_heads, cfg.ffn_dim, cfg.norm, cfg.cloud, rng,
                        "block" + std::to_string(l));
  }
  return blocks;
}

}  // namespace

Forecaster::Forecaster(ModelConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      init_rng_(mix_seed(cfg.seed, 1)),
      noise_rng_(mix_seed(cfg.seed, 2)),
      embed_(1, cfg.d_model, init_rng_, "embed"),
      blocks_(make_blocks(cfg_, init_rng_)),
      head_(cfg.d_model, 1, init_rng_, "head"),
      pos_enc_(sinusoidal_encoding(cfg.lookback, cfg.d_model)) {}

std::vector<ParamRef> Forecaster::params() {
  std::vector<ParamRef> out = embed_.params();
  for (auto& b : blocks_) {
    auto p = b.params();
    out.insert(out.end(), p.begin(), p.end());
  }
  auto ph = head_.params();
  out.insert(out.end(), ph.begin(), ph.end());
  return out;
}

std::size_t Forecaster::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.value->size();
  return n;
}

Tensor Forecaster::forward(const Tensor& x, bool training) {
  if (x.rank() != 2 || x.dim(1) != cfg_.lookback) {
    throw ArgumentError("forecaster: expected [batch, lookback] input");
  }
  const std::size_t B = x.dim(0), P = cfg_.lookback, D = cfg_.d_model;
  cached_batch_ = B;
  Tensor lifted({B, P, 1});
  for (std::size_t i = 0; i < x.size(); ++i) lifted[i] = x[i];
  Tensor h = embed_.forward(lifted);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < P; ++p) {
      double* row = h.data() + (b * P + p) * D;
      const double* pe = pos_enc_.data() + p * D;
      for (std::size_t i = 0; i < D; ++i) row[i] += pe[i];
    }
  }
  const bool stochastic =
      training ? cfg_.cloud.train_stochastic : cfg_.cloud.eval_stochastic;
  for (auto& block : blocks_) h = block.forward(h, &noise_rng_, stochastic);
  Tensor pooled({B, D});
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = h.data() + (b * P + P - 1) * D;
    std::copy(row, row + D, pooled.data() + b * D);
  }
  Tensor out = head_.forward(pooled);  // [B, 1]
  Tensor pred({B});
  for (std::size_t b = 0; b < B; ++b) pred[b] = out(b, 0);
  pred.check_finite("forecaster forward");
  return pred;
}

Tensor Forecaster::backward(const Tensor& g_pred) {
  const std::size_t B = cached_batch_, P = cfg_.lookback, D = cfg_.d_model;
  if (g_pred.rank() != 1 || g_pred.dim(0) != B) {
    throw ArgumentError("forecaster: gradient batch mismatch");
  }
  Tensor g_out({B, std::size_t{1}});
  for (std::size_t b = 0; b < B; ++b) g_out(b, 0) = g_pred[b];
  Tensor g_pooled = head_.backward(g_out);  // [B, D]
  Tensor gh({B, P, D});
  for (std::size_t b = 0; b < B; ++b) {
    double* row = gh.data() + (b * P + P - 1) * D;
    std::copy(g_pooled.data() + b * D, g_pooled.data() + (b + 1) * D, row);
  }
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) gh = it->backward(gh);
  Tensor g_lifted = embed_.backward(gh);  // [B, P, 1]
  Tensor gx({B, P});
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g_lifted[i];
  return gx;
}

Tensor Forecaster::forward_rows(const std::vector<std::vector<double>>& rows,
                                const std::vector<std::size_t>& idx, bool training) {
  Tensor x({idx.size(), cfg_.lookback});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& src = rows[idx[r]];
    if (src.size() != cfg_.lookback) {
      throw ArgumentError("forecaster: window length " + std::to_string(src.size()) +
                          " does not match lookback " + std::to_string(cfg_.lookback));
    }
    std::copy(src.begin(), src.end(), x.data() + r * cfg_.lookback);
  }
  return forward(x, training);
}

double Forecaster::evaluate(const WindowedDataset& windows) {
  if (windows.size() == 0) throw ArgumentError("forecaster: empty evaluation set");
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Tensor pred = forward_rows(windows.inputs, idx, /*training=*/false);
  Tensor target({windows.size()});
  for (std::size_t i = 0; i < windows.size(); ++i) target[i] = windows.targets[i];
  return mse_loss(pred, target);
}

TrainLog Forecaster::train(const WindowedDataset& train_windows, const WindowedDataset* val) {
  if (train_windows.size() == 0) throw ArgumentError("train: empty training set");
  if (train_windows.lookback != cfg_.lookback) {
    throw ArgumentError("train: window lookback does not match model config");
  }
  TrainLog log;
  Adam opt(cfg_.lr);
  auto refs = params();
  Rng shuffle_rng(mix_seed(cfg_.seed, 3));

  auto snapshot = [&] { return export_parameters(); };
  std::vector<CheckpointRecord> best = snapshot();

  if (cfg_.max_epochs == 0) {
    log.train_loss.push_back(evaluate(train_windows));
    if (val && val->size() > 0) {
      log.val_loss.push_back(evaluate(*val));
      log.best_val = log.val_loss.back();
    }
    return log;
  }

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t stagnant = 0;

  for (std::size_t epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
      const std::size_t end = std::min(begin + cfg_.batch_size, order.size());
      std::vector<std::size_t> batch(order.begin() + begin, order.begin() + end);
      Adam::zero_grad(refs);
      Tensor pred = forward_rows(train_windows.inputs, batch, /*training=*/true);
      Tensor target({batch.size()});
      for (std::size_t i = 0; i < batch.size(); ++i) {
        target[i] = train_windows.targets[batch[i]];
      }
      const double loss = mse_loss(pred, target);
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      Tensor g = mse_loss_backward(pred, target);
      backward(g);
      if (cfg_.weight_decay > 0.0) {
        for (auto& p : refs) {
          for (std::size_t i = 0; i < p.value->size(); ++i) {
            (*p.grad)[i] += cfg_.weight_decay * (*p.value)[i];
          }
        }
      }
      opt.step(refs);
      ++log.steps;
      epoch_loss += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    if (cfg_.train_mse_goal > 0.0 && log.train_loss.back() <= cfg_.train_mse_goal) {
      break;
    }

    if (val && val->size() > 0) {
      const double vl = evaluate(*val);
      log.val_loss.push_back(vl);
      if (vl < log.best_val) {
        log.best_val = vl;
        log.best_epoch = epoch;
        best = snapshot();
        stagnant = 0;
      } else if (++stagnant >= cfg_.patience) {
        break;
      }
    }
  }

  if (val && val->size() > 0) {
    import_parameters(best);
  }
  return log;
}

std::vector<double> Forecaster::predict_standardized(
    const std::vector<std::vector<double>>& inputs) {
  if (inputs.empty()) return {};
  std::vector<std::size_t> idx(inputs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Tensor pred = forward_rows(inputs, idx, /*training=*/false);
  return {pred.data(), pred.data() + pred.size()};
}

std::vector<CheckpointRecord> Forecaster::export_parameters() {
  std::vector<CheckpointRecord> out;
  for (const auto& p : params()) {
    out.push_back({p.name, p.value->shape(),
                   {p.value->data(), p.value->data() + p.value->size()}});
  }
  return out;
}

void Forecaster::import_parameters(const std::vector<CheckpointRecord>& records) {
  auto refs = params();
  if (records.size() != refs.size()) {
    throw ArgumentError("import_parameters: record count mismatch");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (records[i].name != refs[i].name || records[i].data.size() != refs[i].value->size()) {
      throw ArgumentError("import_parameters: mismatch at " + records[i].name);
    }
    std::copy(records[i].data.begin(), records[i].data.end(), refs[i].value->data());
  }
}

TrainedModel train_forecaster(const ModelConfig& cfg, const Scaler& scaler,
                              const WindowedDataset& train_windows,
                              const WindowedDataset* val_windows) {
  Forecaster model(cfg);
  TrainedModel out;
  out.cfg = cfg;
  out.scaler = scaler;
  out.log = model.train(train_windows, val_windows);
  out.parameters = model.export_parameters();
  return out;
}

std::vector<double> predict(const TrainedModel& model, const WindowedDataset& windows) {
  if (windows.lookback != model.cfg.lookback) {
    throw ArgumentError("predict: window lookback does not match the model");
  }
  Forecaster net(model.cfg);
  net.import_parameters(model.parameters);
  std::vector<double> std_preds = net.predict_standardized(windows.inputs);
  for (double& v : std_preds) v = model.scaler.inverse(v);
  return std_preds;
}

}  // namespace cmit
