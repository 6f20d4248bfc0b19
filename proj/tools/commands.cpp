#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "grouprec/checkpoint.hpp"
#include "grouprec/data.hpp"
#include "grouprec/error.hpp"
#include "grouprec/eval.hpp"
#include "grouprec/model.hpp"
#include "grouprec/optimizer.hpp"

namespace grouprec::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kConfigFile = "config.txt";
constexpr const char* kMetricsFile = "metrics.csv";

/// Settings shared by the experiment commands. Empty/unset members leave
/// the config value alone.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string data;
  std::string decl;
  std::string scenario;
  std::string context;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::optional<std::size_t> jobs;
  std::string out;
  std::string run_name;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_file, "key=value config file (default: $GROUPREC_CONFIG)");
  cmd->add_option("--set", f.overrides, "override one setting, e.g. --set train.eta=0.05");
  cmd->add_option("--data", f.data, "ratings CSV (data.path)");
  cmd->add_option("--decl", f.decl, "column declaration file (data.decl)");
  cmd->add_option("--scenario", f.scenario, "GRS | MCGRS | MCGRS_MC | MCGRS_SC (scenario.tag)");
  cmd->add_option("--context", f.context, "single context for MCGRS_SC (scenario.context)");
  cmd->add_option("--epochs", f.epochs, "maximum epochs (train.epochs)");
  cmd->add_option("--seed", f.seed, "run seed (train.seed)");
  cmd->add_option("--seeds", f.seeds, "comma-separated seeds for scenario runs (eval.seeds)");
  cmd->add_option("--jobs", f.jobs, "parallel scenario runs (eval.jobs)");
  cmd->add_option("--out", f.out, "output base directory (output.dir)");
  cmd->add_option("--run-name", f.run_name, "run directory name under --out (output.run_name)");
}

/// defaults < base file (run dir) < config file < --set < dedicated flags.
ConfigMap build_config(const ConfigFlags& f, const std::optional<fs::path>& base = std::nullopt) {
  ConfigMap m = ConfigMap::defaults();
  if (base) m.merge_file(*base);
  if (!f.config_file.empty()) {
    m.merge_file(f.config_file);
  } else if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0' && !base) {
    m.merge_file(env);
  }
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    m.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.data.empty()) m.set("data.path", f.data);
  if (!f.decl.empty()) m.set("data.decl", f.decl);
  if (!f.scenario.empty()) m.set("scenario.tag", f.scenario);
  if (!f.context.empty()) m.set("scenario.context", f.context);
  if (f.epochs) m.set("train.epochs", std::to_string(*f.epochs));
  if (f.seed) m.set("train.seed", std::to_string(*f.seed));
  if (!f.seeds.empty()) m.set("eval.seeds", f.seeds);
  if (f.jobs) m.set("eval.jobs", std::to_string(*f.jobs));
  if (!f.out.empty()) m.set("output.dir", f.out);
  if (!f.run_name.empty()) m.set("output.run_name", f.run_name);
  return m;
}

fs::path make_run_dir(const CliConfig& cfg, const std::string& command) {
  std::string name = cfg.run_name;
  if (name.empty()) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << command << "-" << cfg.scenario.label() << "-s" << cfg.experiment.train.seed << "-"
       << std::put_time(&tm, "%Y%m%d-%H%M%S");
    name = os.str();
    fs::path candidate = cfg.output_dir / name;
    for (int k = 2; fs::exists(candidate); ++k) candidate = cfg.output_dir / (name + "-" + std::to_string(k));
    name = candidate.filename().string();
  }
  const fs::path dir = cfg.output_dir / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

Dataset load_data(const CliConfig& cfg) {
  if (cfg.data_path.empty()) throw ConfigError("no data file given (use --data or data.path)");
  return load_ratings_csv(cfg.data_path, resolve_decl(cfg));
}

std::string g17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string metrics_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch,train_mse,train_rmse,val_mse,val_rmse\n" << std::setprecision(17);
  for (const auto& r : h.records)
    os << r.epoch << "," << r.train_mse << "," << r.train_rmse << "," << r.val_mse << "," << r.val_rmse << "\n";
  return os.str();
}

/// State reconstructed from a training run directory.
struct LoadedRun {
  CliConfig cfg;
  Dataset data;
  DataSplit split;
  Vocabularies vocabs;
  Model model;
};

LoadedRun load_run(const fs::path& run_dir, const ConfigFlags& flags) {
  const fs::path config = run_dir / kConfigFile;
  if (!fs::exists(config)) throw ConfigError("no " + std::string(kConfigFile) + " in run directory " + run_dir.string());
  LoadedRun run;
  run.cfg = CliConfig::resolve(build_config(flags, config));
  run.data = load_data(run.cfg);
  run.split = split(run.data, run.cfg.experiment.fractions(), run.cfg.experiment.train.seed);
  run.vocabs = build_vocabs(run.split.train);
  run.model = load_checkpoint(run_dir / kCheckpointFile);

  const auto expected = scenario_schema(
      run.vocabs.full_schema(run.model.hp.criteria_encoding), run.cfg.scenario);
  if (!(expected == run.model.schema)) {
    std::string have;
    for (const auto& f : run.model.schema.fields) have += (have.empty() ? "" : ",") + f.name;
    std::string want;
    for (const auto& f : expected.fields) want += (want.empty() ? "" : ",") + f.name;
    throw ConfigError("checkpoint schema {" + have + "} does not match scenario " +
                      run.cfg.scenario.label() + " {" + want + "}");
  }
  return run;
}

// ---------------------------------------------------------------------------

int cmd_train(const ConfigFlags& flags, std::ostream& out) {
  const ConfigMap map = build_config(flags);
  const CliConfig cfg = CliConfig::resolve(map);
  const Dataset data = load_data(cfg);

  const auto run_dir = make_run_dir(cfg, "train");
  write_text(run_dir / kConfigFile, map.to_text());

  const auto seed = cfg.experiment.train.seed;
  auto run = train_scenario(data, cfg.scenario, cfg.experiment, seed);
  save_checkpoint(run.model, run_dir / kCheckpointFile);
  write_text(run_dir / kMetricsFile, metrics_csv(run.history));

  const auto test = evaluate(run.model, run.split.test, run.vocabs);
  const auto& best = run.history.best();
  double seconds = 0.0;
  for (const auto& r : run.history.records) seconds += r.seconds;
  out << "run_dir=" << run_dir.string() << "\n"
      << "scenario=" << cfg.scenario.label() << "\n"
      << "epochs_ran=" << run.history.records.size() << "\n"
      << "best_epoch=" << best.epoch << "\n"
      << "val_rmse=" << g17(best.val_rmse) << "\n"
      << "val_mse=" << g17(best.val_mse) << "\n"
      << "test_rmse=" << g17(test.rmse) << "\n"
      << "test_mae=" << g17(test.mae) << "\n"
      << "train_seconds=" << std::fixed << std::setprecision(2) << seconds << "\n";
  return kExitOk;
}

int cmd_evaluate(const ConfigFlags& flags, const std::string& run_dir, const std::string& which,
                 bool scenarios_mode, std::ostream& out) {
  if (scenarios_mode) {
    const ConfigMap map = build_config(flags);
    const CliConfig cfg = CliConfig::resolve(map);
    const Dataset data = load_data(cfg);
    const auto dir = make_run_dir(cfg, "scenarios");
    write_text(dir / kConfigFile, map.to_text());

    const std::string single =
        cfg.scenario.tag == ScenarioTag::mcgrs_sc ? cfg.scenario.contexts.front() : map.get("scenario.context");
    auto scenarios = default_scenarios(single);
    for (auto& s : scenarios) s.group_size_token = cfg.scenario.group_size_token;
    const auto report = run_scenarios(data, scenarios, cfg.experiment);

    std::ostringstream csv;
    write_results_csv(report, csv);
    write_text(dir / "results.csv", csv.str());
    const auto table = format_results_table(report);
    write_text(dir / "results.txt", table);
    out << table << "run_dir=" << dir.string() << "\n";
    return kExitOk;
  }

  if (run_dir.empty()) throw ConfigError("evaluate needs --run-dir or --scenarios");
  const auto run = load_run(run_dir, flags);
  const Dataset* part = nullptr;
  if (which == "test") {
    part = &run.split.test;
  } else if (which == "val") {
    part = &run.split.val;
  } else if (which == "train") {
    part = &run.split.train;
  } else {
    throw ConfigError("--split must be train, val or test");
  }
  const auto m = evaluate(run.model, *part, run.vocabs);
  out << "split=" << which << "\nn=" << m.n << "\nrmse=" << g17(m.rmse) << "\nmae=" << g17(m.mae)
      << "\nmse=" << g17(m.mse) << "\n";
  return kExitOk;
}

int cmd_recommend(const ConfigFlags& flags, const std::string& run_dir, const std::string& group,
                  const std::vector<std::string>& contexts, std::size_t k, const std::string& format,
                  std::optional<std::size_t> group_size, std::ostream& out, std::ostream& err) {
  if (run_dir.empty()) throw ConfigError("recommend needs --run-dir");
  if (group.empty()) throw ConfigError("recommend needs --group");
  if (format != "table" && format != "csv") throw ConfigError("--format must be table or csv");
  if (k == 0) throw ConfigError("--k must be at least 1");
  const auto run = load_run(run_dir, flags);

  RankRequest req;
  req.group_id = group;
  req.k = k;
  req.group_size = group_size;
  for (const auto& kv : contexts) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--ctx expects Name=value, got '" + kv + "'");
    req.context[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!group_size) {
    for (const auto& r : run.data.records) {
      if (r.group_id == group && r.group_size) {
        req.group_size = r.group_size;
        break;
      }
    }
  }
  req.candidates = unrated_items(run.vocabs, run.data, group);
  const auto ranking = rank_top_k(run.model, req, run.split.train, run.vocabs);
  if (ranking.unknown_group) {
    err << "warning: group '" << group << "' is not in the training vocabulary; using the UNK embedding\n";
  }
  if (req.candidates.empty()) {
    out << "no candidates: group '" << group << "' has rated every catalogue item\n";
    return kExitOk;
  }
  if (format == "csv") {
    out << "rank,item_id,predicted\n" << std::setprecision(17);
    for (const auto& it : ranking.items) out << it.rank << "," << it.item_id << "," << it.predicted << "\n";
  } else {
    out << std::left << std::setw(6) << "rank" << std::setw(40) << "item" << "predicted\n";
    for (const auto& it : ranking.items) {
      out << std::setw(6) << it.rank << std::setw(40) << it.item_id << std::fixed << std::setprecision(4)
          << it.predicted << "\n";
    }
  }
  return kExitOk;
}

struct GradcheckFlags {
  std::size_t d = 8;
  std::size_t heads = 2;
  std::size_t fields = 6;
  std::size_t dense_width = 16;
  double tol = 1e-3;
  double step = 1e-5;
  std::uint64_t seed = 0;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out, std::ostream& err) {
  if (f.fields < 2) throw ConfigError("--fields must be at least 2 (group and item)");
  if (f.heads == 0 || f.d % f.heads != 0) throw ConfigError("--d must be divisible by --heads");
  if (!(f.tol > 0.0) || !(f.step > 0.0)) throw ConfigError("--tol and --step must be positive");

  SeededRng rng(f.seed);
  FieldSchema schema;
  for (std::size_t i = 0; i < f.fields; ++i) {
    const FieldKind kind = i == 0   ? FieldKind::group
                           : i == 1 ? FieldKind::item
                           : i % 2 == 0 ? FieldKind::context
                                        : FieldKind::criterion;
    schema.fields.push_back({"field" + std::to_string(i), kind, 3 + rng.below(5)});
  }
  Hyperparams hp;
  hp.d = f.d;
  hp.heads = f.heads;
  hp.head_dim = f.d / f.heads;
  hp.dense_width = f.dense_width;
  hp.seed = f.seed;
  Model model = build_model(schema, hp, rng);

  EncodedExample ex;
  for (const auto& field : schema.fields) {
    ex.indices.push_back(rng.below(field.vocab_size));
    ex.values.push_back(1.0);
  }
  ex.target = 1.0 + 4.0 * rng.uniform();

  const auto t0 = std::chrono::steady_clock::now();
  const auto report = model_grad_check(model, ex, f.tol, {f.step, 1e-6}, f.corrupt ? 0.1 : 0.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out << std::left << std::setw(22) << "block" << std::setw(10) << "elements" << std::setw(16)
      << "max_rel_error" << std::setw(16) << "max_abs_error" << "status\n";
  for (const auto& b : report.blocks) {
    out << std::setw(22) << b.name << std::setw(10) << b.elements << std::setw(16) << std::scientific
        << std::setprecision(3) << b.max_rel_error << std::setw(16) << b.max_abs_error
        << (b.passed ? "ok" : "FAIL") << "\n";
  }
  out << std::defaultfloat << "tolerance=" << f.tol << " seconds=" << std::fixed << std::setprecision(3)
      << secs << "\n";
  if (!report.passed()) {
    for (const auto& b : report.blocks) {
      if (!b.passed) {
        err << "gradient check failed for block " << b.name << " (max relative error "
            << std::scientific << b.max_rel_error << " >= " << f.tol << ")\n";
      }
    }
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_synth(const SyntheticConfig& cfg, const std::string& path, std::ostream& out) {
  if (path.empty()) throw ConfigError("synth needs --out");
  const Dataset ds = generate_synthetic(cfg);
  save_ratings_csv(ds, path);
  write_text(path + ".decl", format_schema_decl(SchemaDecl::canonical(ds)));
  out << "wrote " << ds.size() << " records to " << path << "\n";
  return kExitOk;
}

std::vector<std::size_t> parse_cardinalities(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    if (piece.empty()) continue;
    try {
      std::size_t used = 0;
      const auto v = std::stoull(piece, &used);
      if (used != piece.size()) throw std::invalid_argument(piece);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--contexts expects comma-separated counts, got '" + text + "'");
    }
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware multi-criteria group recommender: training, evaluation and ranking"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "train one model and write checkpoint, config and metrics");
  add_config_flags(train, train_flags);

  ConfigFlags eval_flags;
  std::string eval_run_dir;
  std::string eval_split = "test";
  bool scenarios_mode = false;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a trained run or run the four-scenario experiment");
  add_config_flags(evaluate_cmd, eval_flags);
  evaluate_cmd->add_option("--run-dir", eval_run_dir, "directory written by 'train'");
  evaluate_cmd->add_option("--split", eval_split, "train | val | test");
  evaluate_cmd->add_flag("--scenarios", scenarios_mode, "run GRS, MCGRS, MCGRS_MC and MCGRS_SC over eval.seeds");

  ConfigFlags rec_flags;
  std::string rec_run_dir;
  std::string rec_group;
  std::vector<std::string> rec_contexts;
  std::size_t rec_k = 10;
  std::string rec_format = "table";
  std::optional<std::size_t> rec_group_size;
  auto* recommend = app.add_subcommand("recommend", "rank unrated items for a group");
  recommend->add_option("--run-dir", rec_run_dir, "directory written by 'train'")->required();
  recommend->add_option("--group", rec_group, "group id")->required();
  recommend->add_option("--ctx", rec_contexts, "context value, Name=value (repeatable)");
  recommend->add_option("--k", rec_k, "number of items to return");
  recommend->add_option("--format", rec_format, "table | csv");
  recommend->add_option("--group-size", rec_group_size, "group size for the size token");
  recommend->add_option("--data", rec_flags.data, "override the run's data path");

  GradcheckFlags gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every parameter block");
  gradcheck->add_option("--d", gc.d, "embedding dimension");
  gradcheck->add_option("--heads", gc.heads, "attention heads");
  gradcheck->add_option("--fields", gc.fields, "number of input fields");
  gradcheck->add_option("--dense-width", gc.dense_width, "hidden dense width");
  gradcheck->add_option("--tol", gc.tol, "maximum relative error");
  gradcheck->add_option("--step", gc.step, "central difference step");
  gradcheck->add_option("--seed", gc.seed, "model and example seed");
  gradcheck->add_flag("--corrupt", gc.corrupt, "add 0.1 to one analytic gradient (negative control)");

  SyntheticConfig syn;
  std::string syn_out;
  std::string syn_contexts = "3,2,2";
  std::string syn_rule = "criteria_mean";
  auto* synth = app.add_subcommand("synth", "write a synthetic ratings CSV");
  synth->add_option("--out", syn_out, "output CSV path")->required();
  synth->add_option("--groups", syn.n_groups, "number of groups");
  synth->add_option("--items", syn.n_items, "number of items");
  synth->add_option("--records", syn.n_records, "number of ratings");
  synth->add_option("--contexts", syn_contexts, "context cardinalities, comma-separated");
  synth->add_option("--criteria", syn.criteria_count, "number of criteria");
  synth->add_option("--noise", syn.noise_std, "gaussian noise std on the overall rating");
  synth->add_option("--seed", syn.seed, "generator seed");
  synth->add_option("--rule", syn_rule, "criteria_mean | context_shift");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_flags, out);
    if (*evaluate_cmd) return cmd_evaluate(eval_flags, eval_run_dir, eval_split, scenarios_mode, out);
    if (*recommend)
      return cmd_recommend(rec_flags, rec_run_dir, rec_group, rec_contexts, rec_k, rec_format, rec_group_size,
                           out, err);
    if (*gradcheck) return cmd_gradcheck(gc, out, err);
    if (*synth) {
      syn.context_cardinalities = parse_cardinalities(syn_contexts);
      syn.rule = parse_synthetic_rule(syn_rule);
      return cmd_synth(syn, syn_out, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace grouprec::cli
