#include "grouprec/model.hpp"

#include <algorithm>
#include <set>

#include "grouprec/error.hpp"

namespace grouprec {

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::group: return "group";
    case FieldKind::item: return "item";
    case FieldKind::context: return "context";
    case FieldKind::criterion: return "criterion";
  }
  return "?";
}

FieldKind parse_field_kind(std::string_view text) {
  if (text == "group") return FieldKind::group;
  if (text == "item") return FieldKind::item;
  if (text == "context") return FieldKind::context;
  if (text == "criterion") return FieldKind::criterion;
  throw ConfigError("unknown field kind '" + std::string(text) + "'");
}

void FieldSchema::validate() const {
  std::size_t groups = 0;
  std::size_t items = 0;
  std::set<std::string> seen;
  for (const auto& f : fields) {
    if (f.name.empty()) throw ConfigError("schema field with empty name");
    if (!seen.insert(f.name).second) throw ConfigError("duplicate schema field '" + f.name + "'");
    if (f.vocab_size == 0) throw ConfigError("schema field '" + f.name + "' has empty vocabulary");
    groups += f.kind == FieldKind::group;
    items += f.kind == FieldKind::item;
  }
  if (groups != 1 || items != 1) {
    throw ConfigError("schema needs exactly one group and one item field (got " +
                      std::to_string(groups) + " and " + std::to_string(items) + ")");
  }
}

std::optional<std::size_t> FieldSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields.size(); ++i)
    if (fields[i].name == name) return i;
  return std::nullopt;
}

std::vector<std::string> FieldSchema::names_of(FieldKind kind) const {
  std::vector<std::string> out;
  for (const auto& f : fields)
    if (f.kind == kind) out.push_back(f.name);
  return out;
}

// ---------------------------------------------------------------------------
// Scenarios

std::string_view to_string(ScenarioTag tag) {
  switch (tag) {
    case ScenarioTag::grs: return "GRS";
    case ScenarioTag::mcgrs: return "MCGRS";
    case ScenarioTag::mcgrs_mc: return "MCGRS_MC";
    case ScenarioTag::mcgrs_sc: return "MCGRS_SC";
  }
  return "?";
}

ScenarioTag parse_scenario_tag(std::string_view text) {
  if (text == "GRS") return ScenarioTag::grs;
  if (text == "MCGRS") return ScenarioTag::mcgrs;
  if (text == "MCGRS_MC") return ScenarioTag::mcgrs_mc;
  if (text == "MCGRS_SC") return ScenarioTag::mcgrs_sc;
  throw ConfigError("unknown scenario '" + std::string(text) +
                    "' (expected GRS, MCGRS, MCGRS_MC or MCGRS_SC)");
}

Scenario Scenario::grs() { return {ScenarioTag::grs, {}, false, false}; }
Scenario Scenario::mcgrs() { return {ScenarioTag::mcgrs, {}, true, false}; }
Scenario Scenario::mcgrs_mc(std::vector<std::string> contexts) {
  return {ScenarioTag::mcgrs_mc, std::move(contexts), true, false};
}
Scenario Scenario::mcgrs_sc(std::string context) {
  return {ScenarioTag::mcgrs_sc, {std::move(context)}, true, false};
}

void Scenario::validate() const {
  switch (tag) {
    case ScenarioTag::grs:
      if (!contexts.empty() || criteria_active)
        throw ConfigError("GRS scenario takes no contexts and no criteria");
      break;
    case ScenarioTag::mcgrs:
      if (!contexts.empty() || !criteria_active)
        throw ConfigError("MCGRS scenario takes criteria and no contexts");
      break;
    case ScenarioTag::mcgrs_mc:
      if (!criteria_active) throw ConfigError("MCGRS_MC scenario requires criteria");
      break;
    case ScenarioTag::mcgrs_sc:
      if (!criteria_active || contexts.size() != 1)
        throw ConfigError("MCGRS_SC scenario requires criteria and exactly one context");
      break;
  }
}

std::string Scenario::label() const {
  std::string out(to_string(tag));
  if (tag == ScenarioTag::mcgrs_sc && !contexts.empty()) out += "(" + contexts.front() + ")";
  if (group_size_token) out += "+size";
  return out;
}

FieldSchema scenario_schema(const FieldSchema& full, const Scenario& scenario) {
  scenario.validate();
  const auto all_contexts = full.names_of(FieldKind::context);
  for (const auto& name : scenario.contexts) {
    if (std::find(all_contexts.begin(), all_contexts.end(), name) == all_contexts.end()) {
      throw ConfigError("unknown context '" + name + "' for scenario " + scenario.label());
    }
  }
  auto context_active = [&](const std::string& name) {
    switch (scenario.tag) {
      case ScenarioTag::grs:
      case ScenarioTag::mcgrs: return false;
      case ScenarioTag::mcgrs_mc:
        return scenario.contexts.empty() || std::find(scenario.contexts.begin(),
                                                      scenario.contexts.end(),
                                                      name) != scenario.contexts.end();
      case ScenarioTag::mcgrs_sc: return name == scenario.contexts.front();
    }
    return false;
  };

  FieldSchema out;
  for (const auto& f : full.fields) {
    if (f.kind == FieldKind::group || f.kind == FieldKind::item ||
        (f.kind == FieldKind::context && f.name != kGroupSizeField && context_active(f.name))) {
      out.fields.push_back(f);
    }
  }
  if (scenario.group_size_token) {
    // UNK plus the buckets 2, 3, 4, 5+.
    out.fields.push_back({std::string(kGroupSizeField), FieldKind::context, 5});
  }
  if (scenario.criteria_active) {
    for (const auto& f : full.fields)
      if (f.kind == FieldKind::criterion) out.fields.push_back(f);
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Model

void Hyperparams::validate() const {
  if (d == 0 || heads == 0 || head_dim == 0 || dense_width == 0) {
    throw ConfigError("hyperparameters d, heads, head_dim and dense_width must be positive");
  }
  if (heads * head_dim != d) {
    throw ConfigError("heads * head_dim must equal d (" + std::to_string(heads) + " * " +
                      std::to_string(head_dim) + " != " + std::to_string(d) + ")");
  }
  if (!(layernorm_eps > 0.0)) throw ConfigError("layernorm eps must be positive");
}

std::vector<ParamBlock> Model::parameters() {
  std::vector<ParamBlock> out;
  for (auto& e : embeddings) out.push_back({"embedding." + e.name, &e.weights, &e.grads});
  for (std::size_t h = 0; h < attention.heads; ++h)
    out.push_back({"attention.w_q." + std::to_string(h), &attention.w_q[h], &attention.grad_w_q[h]});
  for (std::size_t h = 0; h < attention.heads; ++h)
    out.push_back({"attention.w_k." + std::to_string(h), &attention.w_k[h], &attention.grad_w_k[h]});
  for (std::size_t h = 0; h < attention.heads; ++h)
    out.push_back({"attention.w_v." + std::to_string(h), &attention.w_v[h], &attention.grad_w_v[h]});
  out.push_back({"attention.w_o", &attention.w_o, &attention.grad_w_o});
  out.push_back({"hidden.w", &hidden.w, &hidden.grad_w});
  out.push_back({"hidden.b", &hidden.b, &hidden.grad_b});
  out.push_back({"output.w", &output.w, &output.grad_w});
  out.push_back({"output.b", &output.b, &output.grad_b});
  return out;
}

Model build_model(const FieldSchema& schema, const Hyperparams& hp, SeededRng& rng) {
  schema.validate();
  hp.validate();
  Model m;
  m.schema = schema;
  m.hp = hp;
  for (const auto& f : schema.fields) {
    m.embeddings.push_back(EmbeddingTable::init(f.name, f.vocab_size, hp.d, rng));
  }
  m.attention = MhaParams::init(hp.d, hp.heads, hp.head_dim, rng, hp.attention_scale);
  m.hidden = DenseParams::init(schema.size() * hp.d, hp.dense_width, rng);
  m.output = DenseParams::init(hp.dense_width, 1, rng);
  return m;
}

Model build_model(const FieldSchema& schema, const Hyperparams& hp) {
  SeededRng rng(hp.seed);
  return build_model(schema, hp, rng);
}

void check_example(const Model& model, const EncodedExample& example) {
  if (example.indices.size() != model.field_count() ||
      (!example.values.empty() && example.values.size() != model.field_count())) {
    throw ShapeError("example has " + std::to_string(example.indices.size()) +
                     " field indices, model expects " + std::to_string(model.field_count()));
  }
  for (std::size_t f = 0; f < example.indices.size(); ++f) {
    if (example.indices[f] >= model.embeddings[f].vocab_size()) {
      throw LookupError("index " + std::to_string(example.indices[f]) + " out of range for field '" +
                        model.schema.fields[f].name + "' (vocab size " +
                        std::to_string(model.embeddings[f].vocab_size()) + ")");
    }
  }
}

ModelForward model_forward(const Model& model, const EncodedExample& example) {
  check_example(model, example);
  const std::size_t fields = model.field_count();
  const std::size_t d = model.hp.d;

  ModelForward out;
  ModelCache& c = out.cache;
  c.indices = example.indices;
  c.values = example.values.empty() ? std::vector<double>(fields, 1.0) : example.values;

  c.tokens = Matrix(fields, d);
  for (std::size_t f = 0; f < fields; ++f) {
    const auto row = embed_lookup(model.embeddings[f], c.indices[f]);
    auto dst = c.tokens.row(f);
    for (std::size_t j = 0; j < d; ++j) dst[j] = c.values[f] * row[j];
  }

  auto attn = mha_forward(model.attention, c.tokens);
  c.attention = std::move(attn.cache);
  auto norm = layernorm_forward(attn.z, model.hp.layernorm_eps);
  c.norm = std::move(norm.cache);

  // Flatten row-major: token f occupies [f*d, (f+1)*d).
  auto hidden = dense_forward(model.hidden, norm.y.values(), Activation::relu);
  c.hidden = std::move(hidden.cache);
  auto output = dense_forward(model.output, hidden.y, Activation::none);
  c.output = std::move(output.cache);
  out.prediction = output.y.front();
  return out;
}

double predict(const Model& model, const EncodedExample& example) {
  return model_forward(model, example).prediction;
}

void model_backward(Model& model, const ModelCache& cache, double dloss_dpred) {
  if (dloss_dpred == 0.0) return;
  const std::size_t fields = model.field_count();
  const std::size_t d = model.hp.d;

  const double seed[1] = {dloss_dpred};
  const auto d_hidden = dense_backward(model.output, cache.output, seed);
  const auto d_flat = dense_backward(model.hidden, cache.hidden, d_hidden);
  const Matrix d_norm(fields, d, d_flat);
  const Matrix d_z = layernorm_backward(cache.norm, d_norm);
  const Matrix d_tokens = mha_backward(model.attention, cache.attention, d_z);

  std::vector<double> upstream(d);
  for (std::size_t f = 0; f < fields; ++f) {
    auto row = d_tokens.row(f);
    for (std::size_t j = 0; j < d; ++j) upstream[j] = cache.values[f] * row[j];
    embed_backward(model.embeddings[f], cache.indices[f], upstream);
  }
}

void zero_grads(Model& model) {
  for (auto& e : model.embeddings) e.grads.fill(0.0);
  model.attention.zero_grads();
  model.hidden.zero_grads();
  model.output.zero_grads();
}

GradCheckReport model_grad_check(Model& model, const EncodedExample& example, double tolerance,
                                 const GradCheckOptions& options, double corrupt_offset) {
  zero_grads(model);
  const auto fwd = model_forward(model, example);
  model_backward(model, fwd.cache, 2.0 * (fwd.prediction - example.target));
  if (corrupt_offset != 0.0) model.hidden.grad_w.values()[0] += corrupt_offset;

  auto loss = [&] {
    const double diff = predict(model, example) - example.target;
    return diff * diff;
  };
  const auto blocks = model.parameters();
  auto report = grad_check(loss, blocks, tolerance, options);
  zero_grads(model);
  return report;
}

}  // namespace grouprec
