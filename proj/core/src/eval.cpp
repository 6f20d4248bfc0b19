#include "grouprec/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "grouprec/baseline.hpp"
#include "grouprec/error.hpp"

namespace grouprec {
namespace {

void check_pair(std::span<const double> preds, std::span<const double> targets) {
  if (preds.empty()) throw ArgumentError("metrics need at least one prediction");
  if (preds.size() != targets.size()) {
    throw ArgumentError("metrics length mismatch: " + std::to_string(preds.size()) + " vs " +
                        std::to_string(targets.size()));
  }
}

std::pair<double, double> mean_and_sd(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

double rmse(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += (targets[i] - preds[i]) * (targets[i] - preds[i]);
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

double mae(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(targets[i] - preds[i]);
  return sum / static_cast<double>(preds.size());
}

Metrics compute_metrics(std::span<const double> preds, std::span<const double> targets) {
  Metrics m;
  m.rmse = rmse(preds, targets);
  m.mae = mae(preds, targets);
  m.mse = m.rmse * m.rmse;
  m.n = preds.size();
  return m;
}

Metrics evaluate(const Model& model, std::span<const EncodedExample> examples) {
  std::vector<double> preds;
  std::vector<double> targets;
  preds.reserve(examples.size());
  targets.reserve(examples.size());
  for (const auto& ex : examples) {
    preds.push_back(predict(model, ex));
    targets.push_back(ex.target);
  }
  return compute_metrics(preds, targets);
}

Metrics evaluate(const Model& model, const Dataset& test, const Vocabularies& vocabs) {
  const auto examples = encode_dataset(test, vocabs, model.schema, model.hp.criteria_encoding);
  return evaluate(model, examples);
}

// ---------------------------------------------------------------------------
// Ranking

std::vector<std::string> unrated_items(const Vocabularies& vocabs, const Dataset& interactions,
                                       const std::string& group_id) {
  std::set<std::string> rated;
  for (const auto& r : interactions.records)
    if (r.group_id == group_id) rated.insert(r.item_id);
  std::vector<std::string> out;
  for (std::size_t i = 1; i < vocabs.items.table_rows(); ++i) {
    const auto& item = vocabs.items.token(i);
    if (!rated.contains(item)) out.push_back(item);
  }
  return out;
}

Ranking rank_top_k(const Model& model, const RankRequest& request, const Dataset& train,
                   const Vocabularies& vocabs) {
  if (request.k == 0) throw ArgumentError("rank_top_k requires k >= 1");
  for (const auto& [name, value] : request.context) {
    if (std::find(vocabs.context_names.begin(), vocabs.context_names.end(), name) ==
        vocabs.context_names.end()) {
      throw ConfigError("unknown context '" + name + "'");
    }
  }
  for (const auto& f : model.schema.fields) {
    if (f.kind == FieldKind::context && f.name != kGroupSizeField && !request.context.contains(f.name)) {
      throw ConfigError("ranking needs a value for context '" + f.name + "'");
    }
  }

  Ranking out;
  out.unknown_group = !vocabs.groups.contains(request.group_id);
  if (request.candidates.empty()) return out;

  RatingRecord probe;
  probe.group_id = request.group_id;
  probe.contexts = request.context;
  probe.group_size = request.group_size;
  std::vector<RankedItem> scored;
  scored.reserve(request.candidates.size());
  for (const auto& item : request.candidates) {
    probe.item_id = item;
    probe.criteria = impute_criteria(train, item);
    const auto ex = encode_record(probe, vocabs, model.schema, model.hp.criteria_encoding);
    scored.push_back({item, vocabs.scale.clamp(predict(model, ex)), 0, vocabs.items.index_of(item)});
  }
  std::sort(scored.begin(), scored.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.predicted != b.predicted) return a.predicted > b.predicted;
    if (a.item_index != b.item_index) return a.item_index < b.item_index;
    return a.item_id < b.item_id;
  });
  scored.resize(std::min(request.k, scored.size()));
  for (std::size_t i = 0; i < scored.size(); ++i) scored[i].rank = i + 1;
  out.items = std::move(scored);
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

SplitFractions ExperimentConfig::fractions() const {
  return {1.0 - train.validation_fraction - test_fraction, train.validation_fraction, test_fraction};
}

std::uint64_t init_seed_for(std::uint64_t seed) { return mix_seed(seed, 0x696e6974ULL); }

TrainedRun train_scenario(const Dataset& data, const Scenario& scenario,
                          const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainedRun run;
  run.split = split(data, cfg.fractions(), seed);
  run.vocabs = build_vocabs(run.split.train);
  run.schema = scenario_schema(run.vocabs.full_schema(cfg.hp.criteria_encoding), scenario);

  Hyperparams hp = cfg.hp;
  hp.seed = init_seed_for(seed);
  run.model = build_model(run.schema, hp);

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const auto enc = hp.criteria_encoding;
  const auto train = encode_dataset(run.split.train, run.vocabs, run.schema, enc);
  const auto val = encode_dataset(run.split.val, run.vocabs, run.schema, enc);
  run.history = fit(run.model, train, val, tc);
  return run;
}

const ScenarioResult* ScenarioReport::find(ScenarioTag tag) const {
  for (const auto& s : scenarios)
    if (s.scenario.tag == tag) return &s;
  return nullptr;
}

std::vector<Scenario> default_scenarios(const std::string& single_context) {
  return {Scenario::grs(), Scenario::mcgrs(), Scenario::mcgrs_mc(), Scenario::mcgrs_sc(single_context)};
}

ScenarioReport run_scenarios(const Dataset& data, std::span<const Scenario> scenarios,
                             const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("run_scenarios needs at least one seed");
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t total = scenarios.size() * n_seeds;
  std::vector<ScenarioRun> runs(total);
  std::vector<std::exception_ptr> errors(total);

  auto run_one = [&](std::size_t job) {
    const auto& scenario = scenarios[job / n_seeds];
    const auto seed = cfg.seeds[job % n_seeds];
    try {
      auto trained = train_scenario(data, scenario, cfg, seed);
      const auto enc = cfg.hp.criteria_encoding;
      const auto train = encode_dataset(trained.split.train, trained.vocabs, trained.schema, enc);
      const auto test = encode_dataset(trained.split.test, trained.vocabs, trained.schema, enc);

      ScenarioRun& r = runs[job];
      r.seed = seed;
      r.metrics = evaluate(trained.model, test);
      r.epochs_ran = trained.history.records.size();
      r.split_fingerprint = trained.split.fingerprint;

      const auto baseline = linear_baseline_fit(train, trained.schema, cfg.baseline_l2, data.scale);
      std::vector<double> preds;
      std::vector<double> targets;
      for (const auto& ex : test) {
        preds.push_back(linear_baseline_predict(baseline, ex));
        targets.push_back(ex.target);
      }
      r.baseline = compute_metrics(preds, targets);
    } catch (...) {
      errors[job] = std::current_exception();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(cfg.jobs, 1, total);
  if (workers == 1) {
    for (std::size_t j = 0; j < total; ++j) run_one(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < total; j = next++) run_one(j);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ScenarioReport report;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    ScenarioResult res;
    res.scenario = scenarios[s];
    std::vector<double> r, m, br, bm;
    for (std::size_t k = 0; k < n_seeds; ++k) {
      const auto& run = runs[s * n_seeds + k];
      res.runs.push_back(run);
      r.push_back(run.metrics.rmse);
      m.push_back(run.metrics.mae);
      br.push_back(run.baseline.rmse);
      bm.push_back(run.baseline.mae);
    }
    std::tie(res.mean_rmse, res.std_rmse) = mean_and_sd(r);
    std::tie(res.mean_mae, res.std_mae) = mean_and_sd(m);
    res.baseline_mean_rmse = mean_and_sd(br).first;
    res.baseline_mean_mae = mean_and_sd(bm).first;
    report.scenarios.push_back(std::move(res));
  }
  return report;
}

void write_results_csv(const ScenarioReport& report, std::ostream& out) {
  out << "scenario,seed,rmse,mae,epochs_ran,baseline_rmse,baseline_mae\n";
  out << std::setprecision(17);
  for (const auto& s : report.scenarios) {
    for (const auto& r : s.runs) {
      out << s.scenario.label() << "," << r.seed << "," << r.metrics.rmse << "," << r.metrics.mae
          << "," << r.epochs_ran << "," << r.baseline.rmse << "," << r.baseline.mae << "\n";
    }
  }
}

std::string format_results_table(const ScenarioReport& report) {
  std::ostringstream os;
  const int label_w = 10;
  const int col_w = 24;
  os << std::left << std::setw(label_w) << "Model";
  for (const auto& s : report.scenarios) os << " | " << std::setw(col_w) << s.scenario.label();
  os << "\n" << std::setw(label_w) << "";
  for (std::size_t i = 0; i < report.scenarios.size(); ++i)
    os << " | " << std::setw(col_w) << "RMSE / MAE";
  os << "\n" << std::string(label_w + report.scenarios.size() * (col_w + 3), '-') << "\n";

  os << std::setw(label_w) << "Linear";
  for (const auto& s : report.scenarios)
    os << " | " << std::setw(col_w) << (fixed4(s.baseline_mean_rmse) + " / " + fixed4(s.baseline_mean_mae));
  os << "\n" << std::setw(label_w) << "MHA";
  for (const auto& s : report.scenarios)
    os << " | " << std::setw(col_w) << (fixed4(s.mean_rmse) + " / " + fixed4(s.mean_mae));
  os << "\n" << std::setw(label_w) << "MHA (sd)";
  for (const auto& s : report.scenarios)
    os << " | " << std::setw(col_w) << (fixed4(s.std_rmse) + " / " + fixed4(s.std_mae));
  os << "\n";
  return os.str();
}

}  // namespace grouprec
