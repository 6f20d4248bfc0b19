#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "grouprec/matrix.hpp"
#include "grouprec/model.hpp"
#include "grouprec/rng.hpp"

namespace grouprec {

struct MseResult {
  double loss = 0.0;
  std::vector<double> dpreds;  // 2(pred - target)/N
};

/// Throws ArgumentError on empty or mismatched inputs.
MseResult mse_loss(std::span<const double> preds, std::span<const double> targets);

/// Adagrad accumulators. `accum[i]` mirrors the i-th block of
/// Model::parameters().
struct AdagradState {
  double eta = 0.01;
  double eps = 1e-8;
  std::vector<Matrix> accum;

  static AdagradState for_model(Model& model, double eta, double eps);
  /// Current per-element step size eta / sqrt(S + eps) for one block.
  Matrix effective_rate(std::size_t block) const;
};

/// S += g^2; theta -= eta * g / sqrt(S + eps). Gradients are left as is.
void adagrad_step(AdagradState& state, Model& model);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double eta = 0.01;
  double eps = 1e-8;
  std::size_t early_stop_patience = 20;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double train_rmse = 0.0;
  double val_mse = 0.0;
  double val_rmse = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;  // index into records
  bool stopped_early = false;

  const EpochRecord& best() const { return records.at(best_epoch); }
};

/// One pass over `train` in an order shuffled by `rng`. Each mini-batch:
/// zero grads, forward, MSE gradient, backward, one Adagrad step. Returns
/// the batch losses averaged with batch-size weights.
double train_epoch(Model& model, std::span<const EncodedExample> train, AdagradState& state,
                   const TrainConfig& cfg, SeededRng& rng);

/// Mean squared error of raw predictions.
double dataset_mse(const Model& model, std::span<const EncodedExample> examples);

/// Trains with early stopping on validation RMSE and restores the best
/// epoch's parameters before returning.
TrainHistory fit(Model& model, std::span<const EncodedExample> train,
                 std::span<const EncodedExample> val, const TrainConfig& cfg);

}  // namespace grouprec
