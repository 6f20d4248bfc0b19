#include "config.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "grouprec/error.hpp"

namespace grouprec::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::uint64_t to_u64(const std::string& key, std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config " + key + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

double to_double(const std::string& key, std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config " + key + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

bool to_bool(const std::string& key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config " + key + ": expected true/false, got '" + std::string(text) + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

ConfigMap ConfigMap::defaults() {
  ConfigMap m;
  m.values_ = {
      {"data.path", ""},
      {"data.decl", ""},
      {"scenario.tag", "MCGRS_SC"},
      {"scenario.context", "Class"},
      {"scenario.mc_contexts", ""},
      {"scenario.group_size_token", "false"},
      {"model.d", "16"},
      {"model.heads", "4"},
      {"model.head_dim", "4"},
      {"model.dense_width", "64"},
      {"model.layernorm_eps", "1e-05"},
      {"model.attention_scale", "head_dim"},
      {"model.criteria_encoding", "categorical"},
      {"train.epochs", "200"},
      {"train.batch_size", "32"},
      {"train.eta", "0.01"},
      {"train.eps", "1e-08"},
      {"train.patience", "20"},
      {"train.seed", "0"},
      {"train.validation_fraction", "0.1"},
      {"split.test_fraction", "0.1"},
      {"eval.seeds", "0,1,2,3,4"},
      {"eval.jobs", "1"},
      {"eval.baseline_l2", "1"},
      {"output.dir", "runs"},
      {"output.run_name", ""},
  };
  return m;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& ConfigMap::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

void ConfigMap::merge_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(n) + ": expected key=value");
    }
    set(std::string(trim(l.substr(0, eq))), std::string(trim(l.substr(eq + 1))));
  }
}

void ConfigMap::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  merge_text(std::string(std::istreambuf_iterator<char>(in), {}), path.string());
}

std::string ConfigMap::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(text)) seeds.push_back(to_u64("eval.seeds", s));
  if (seeds.empty()) throw ConfigError("config eval.seeds: at least one seed required");
  return seeds;
}

CliConfig CliConfig::resolve(const ConfigMap& m) {
  auto u = [&](const char* key) { return to_u64(key, m.get(key)); };
  auto f = [&](const char* key) { return to_double(key, m.get(key)); };

  CliConfig c;
  c.data_path = m.get("data.path");
  c.decl_path = m.get("data.decl");

  const auto tag = parse_scenario_tag(m.get("scenario.tag"));
  switch (tag) {
    case ScenarioTag::grs: c.scenario = Scenario::grs(); break;
    case ScenarioTag::mcgrs: c.scenario = Scenario::mcgrs(); break;
    case ScenarioTag::mcgrs_mc: c.scenario = Scenario::mcgrs_mc(split_list(m.get("scenario.mc_contexts"))); break;
    case ScenarioTag::mcgrs_sc: c.scenario = Scenario::mcgrs_sc(m.get("scenario.context")); break;
  }
  c.scenario.group_size_token = to_bool("scenario.group_size_token", m.get("scenario.group_size_token"));
  c.scenario.validate();

  auto& hp = c.experiment.hp;
  hp.d = u("model.d");
  hp.heads = u("model.heads");
  hp.head_dim = u("model.head_dim");
  hp.dense_width = u("model.dense_width");
  hp.layernorm_eps = f("model.layernorm_eps");
  const auto& scale = m.get("model.attention_scale");
  if (scale == "head_dim") {
    hp.attention_scale = AttentionScale::head_dim;
  } else if (scale == "model_dim") {
    hp.attention_scale = AttentionScale::model_dim;
  } else {
    throw ConfigError("config model.attention_scale: expected head_dim or model_dim");
  }
  const auto& enc = m.get("model.criteria_encoding");
  if (enc == "categorical") {
    hp.criteria_encoding = CriteriaEncoding::categorical;
  } else if (enc == "ordinal") {
    hp.criteria_encoding = CriteriaEncoding::ordinal;
  } else {
    throw ConfigError("config model.criteria_encoding: expected categorical or ordinal");
  }
  hp.validate();

  auto& tc = c.experiment.train;
  tc.epochs = u("train.epochs");
  tc.batch_size = u("train.batch_size");
  tc.eta = f("train.eta");
  tc.eps = f("train.eps");
  tc.early_stop_patience = u("train.patience");
  tc.seed = u("train.seed");
  tc.validation_fraction = f("train.validation_fraction");
  tc.validate();

  c.experiment.test_fraction = f("split.test_fraction");
  if (!(c.experiment.test_fraction > 0.0) ||
      !(c.experiment.test_fraction + tc.validation_fraction < 1.0)) {
    throw ConfigError("config split.test_fraction must be positive and leave room for training data");
  }
  c.experiment.seeds = parse_seed_list(m.get("eval.seeds"));
  c.experiment.jobs = u("eval.jobs");
  c.experiment.baseline_l2 = f("eval.baseline_l2");
  if (!(c.experiment.baseline_l2 > 0.0)) throw ConfigError("config eval.baseline_l2 must be positive");

  c.output_dir = m.get("output.dir");
  c.run_name = m.get("output.run_name");
  return c;
}

SchemaDecl resolve_decl(const CliConfig& cfg) {
  if (!cfg.decl_path.empty()) return load_schema_decl(cfg.decl_path);
  const std::filesystem::path sidecar = cfg.data_path.string() + ".decl";
  if (std::filesystem::exists(sidecar)) return load_schema_decl(sidecar);
  return SchemaDecl::itm_rec_group();
}

}  // namespace grouprec::cli
