#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grouprec/data.hpp"
#include "grouprec/model.hpp"
#include "grouprec/optimizer.hpp"

namespace grouprec {

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
};

double rmse(std::span<const double> preds, std::span<const double> targets);
double mae(std::span<const double> preds, std::span<const double> targets);
Metrics compute_metrics(std::span<const double> preds, std::span<const double> targets);

/// Metrics of raw (unclamped) predictions.
Metrics evaluate(const Model& model, std::span<const EncodedExample> examples);
/// Encodes `test` against the model's own schema, with ground-truth criteria.
Metrics evaluate(const Model& model, const Dataset& test, const Vocabularies& vocabs);

// ---------------------------------------------------------------------------
// Top-K ranking

struct RankedItem {
  std::string item_id;
  double predicted = 0.0;  // clamped to the rating scale
  std::size_t rank = 0;    // 1-based
  std::size_t item_index = 0;
};

struct Ranking {
  std::vector<RankedItem> items;
  bool unknown_group = false;
};

struct RankRequest {
  std::string group_id;
  std::vector<std::string> candidates;
  std::map<std::string, std::string> context;
  std::size_t k = 10;
  std::optional<std::size_t> group_size;
};

/// Imputes criteria for each candidate from `train`, predicts, clamps, and
/// returns the best min(k, |candidates|) ordered by descending prediction,
/// ties by ascending item vocabulary index. Throws ConfigError for context
/// names the data does not know or contexts the model needs but lacks.
Ranking rank_top_k(const Model& model, const RankRequest& request, const Dataset& train,
                   const Vocabularies& vocabs);

/// Catalogue items (training vocabulary order) the group has not rated in
/// `interactions`.
std::vector<std::string> unrated_items(const Vocabularies& vocabs, const Dataset& interactions,
                                       const std::string& group_id);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  Hyperparams hp;
  TrainConfig train;
  double test_fraction = 0.1;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double baseline_l2 = 1.0;
  std::size_t jobs = 1;

  SplitFractions fractions() const;
};

/// Everything one (scenario, seed) training run produces.
struct TrainedRun {
  DataSplit split;
  Vocabularies vocabs;
  FieldSchema schema;
  Model model;
  TrainHistory history;
};

/// split -> vocabularies -> scenario schema -> build -> fit. The split,
/// initialisation and shuffling streams all derive from `seed`.
TrainedRun train_scenario(const Dataset& data, const Scenario& scenario,
                          const ExperimentConfig& cfg, std::uint64_t seed);

/// Seed used for model initialisation under `seed`.
std::uint64_t init_seed_for(std::uint64_t seed);

struct ScenarioRun {
  std::uint64_t seed = 0;
  Metrics metrics;
  Metrics baseline;
  std::size_t epochs_ran = 0;
  std::uint64_t split_fingerprint = 0;
};

struct ScenarioResult {
  Scenario scenario;
  std::vector<ScenarioRun> runs;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;  // sample standard deviation, 0 for one seed
  double mean_mae = 0.0;
  double std_mae = 0.0;
  double baseline_mean_rmse = 0.0;
  double baseline_mean_mae = 0.0;
};

struct ScenarioReport {
  std::vector<ScenarioResult> scenarios;
  const ScenarioResult* find(ScenarioTag tag) const;
};

/// GRS, MCGRS, MCGRS_MC (all contexts), MCGRS_SC(single_context).
std::vector<Scenario> default_scenarios(const std::string& single_context = "Class");

/// Runs every scenario for every seed on paired splits. With jobs > 1 the
/// runs execute on worker threads; results are assembled in (scenario,
/// seed) order regardless.
ScenarioReport run_scenarios(const Dataset& data, std::span<const Scenario> scenarios,
                             const ExperimentConfig& cfg);

/// scenario,seed,rmse,mae,epochs_ran,baseline_rmse,baseline_mae
void write_results_csv(const ScenarioReport& report, std::ostream& out);
/// Scenario columns with RMSE/MAE rows, one line per model.
std::string format_results_table(const ScenarioReport& report);

}  // namespace grouprec
