#include "grouprec/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "grouprec/error.hpp"

namespace grouprec {

MseResult mse_loss(std::span<const double> preds, std::span<const double> targets) {
  if (preds.empty()) throw ArgumentError("mse_loss requires at least one prediction");
  if (preds.size() != targets.size()) {
    throw ArgumentError("mse_loss length mismatch: " + std::to_string(preds.size()) + " vs " +
                        std::to_string(targets.size()));
  }
  const double n = static_cast<double>(preds.size());
  MseResult out;
  out.dpreds.resize(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double diff = preds[i] - targets[i];
    out.loss += diff * diff;
    out.dpreds[i] = 2.0 * diff / n;
  }
  out.loss /= n;
  return out;
}

AdagradState AdagradState::for_model(Model& model, double eta, double eps) {
  AdagradState s;
  s.eta = eta;
  s.eps = eps;
  for (const auto& b : model.parameters()) s.accum.emplace_back(b.value->rows(), b.value->cols());
  return s;
}

Matrix AdagradState::effective_rate(std::size_t block) const {
  Matrix out = accum.at(block);
  for (double& v : out.values()) v = eta / std::sqrt(v + eps);
  return out;
}

void adagrad_step(AdagradState& state, Model& model) {
  auto blocks = model.parameters();
  if (blocks.size() != state.accum.size()) {
    throw ShapeError("adagrad state has " + std::to_string(state.accum.size()) +
                     " blocks, model has " + std::to_string(blocks.size()));
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Matrix& s = state.accum[b];
    if (!s.same_shape(*blocks[b].value)) {
      throw ShapeError("adagrad state shape mismatch for block " + blocks[b].name);
    }
    auto theta = blocks[b].value->values();
    auto g = blocks[b].grad->values();
    auto acc = s.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (g[i] == 0.0) continue;
      acc[i] += g[i] * g[i];
      theta[i] -= state.eta * g[i] / std::sqrt(acc[i] + state.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || early_stop_patience == 0) {
    throw ConfigError("train epochs, batch_size and patience must be positive");
  }
  if (!(eta > 0.0) || !(eps > 0.0)) throw ConfigError("train eta and eps must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
}

double train_epoch(Model& model, std::span<const EncodedExample> train, AdagradState& state,
                   const TrainConfig& cfg, SeededRng& rng) {
  if (train.empty()) throw ArgumentError("train_epoch requires a non-empty training set");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  std::vector<ModelCache> caches;
  std::vector<double> preds;
  std::vector<double> targets;
  double weighted_loss = 0.0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    zero_grads(model);
    caches.clear();
    preds.clear();
    targets.clear();
    for (std::size_t i = start; i < end; ++i) {
      const auto& ex = train[order[i]];
      auto fwd = model_forward(model, ex);
      preds.push_back(fwd.prediction);
      targets.push_back(ex.target);
      caches.push_back(std::move(fwd.cache));
    }
    const auto mse = mse_loss(preds, targets);
    if (!std::isfinite(mse.loss)) throw NumericError("training loss became non-finite");
    for (std::size_t i = 0; i < caches.size(); ++i) model_backward(model, caches[i], mse.dpreds[i]);
    adagrad_step(state, model);
    weighted_loss += mse.loss * static_cast<double>(end - start);
  }
  return weighted_loss / static_cast<double>(train.size());
}

double dataset_mse(const Model& model, std::span<const EncodedExample> examples) {
  if (examples.empty()) throw ArgumentError("dataset_mse requires examples");
  double sum = 0.0;
  for (const auto& ex : examples) {
    const double diff = predict(model, ex) - ex.target;
    sum += diff * diff;
  }
  return sum / static_cast<double>(examples.size());
}

TrainHistory fit(Model& model, std::span<const EncodedExample> train,
                 std::span<const EncodedExample> val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty() || val.empty()) throw ArgumentError("fit requires non-empty train and validation sets");

  AdagradState state = AdagradState::for_model(model, cfg.eta, cfg.eps);
  TrainHistory history;
  std::vector<Matrix> best_params;
  double best_rmse = INFINITY;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    SeededRng rng(mix_seed(cfg.seed, epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = train_epoch(model, train, state, cfg, rng);
    rec.train_rmse = std::sqrt(rec.train_mse);
    rec.val_mse = dataset_mse(model, val);
    rec.val_rmse = std::sqrt(rec.val_mse);
    if (!std::isfinite(rec.val_mse)) throw NumericError("validation loss became non-finite");
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.records.push_back(rec);

    if (rec.val_rmse < best_rmse) {
      best_rmse = rec.val_rmse;
      history.best_epoch = history.records.size() - 1;
      since_best = 0;
      best_params.clear();
      for (const auto& b : model.parameters()) best_params.push_back(*b.value);
    } else if (++since_best >= cfg.early_stop_patience) {
      history.stopped_early = true;
      break;
    }
  }

  auto blocks = model.parameters();
  for (std::size_t i = 0; i < blocks.size(); ++i) *blocks[i].value = best_params[i];
  zero_grads(model);
  return history;
}

}  // namespace grouprec
