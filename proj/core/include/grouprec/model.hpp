#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grouprec/grad_check.hpp"
#include "grouprec/layers.hpp"
#include "grouprec/matrix.hpp"
#include "grouprec/rng.hpp"

namespace grouprec {

enum class FieldKind : std::uint8_t { group = 0, item = 1, context = 2, criterion = 3 };

std::string_view to_string(FieldKind kind);
FieldKind parse_field_kind(std::string_view text);

struct FieldDesc {
  std::string name;
  FieldKind kind = FieldKind::context;
  std::size_t vocab_size = 0;  // embedding rows, including the UNK row

  friend bool operator==(const FieldDesc&, const FieldDesc&) = default;
};

/// Ordered input fields. The order fixes the token rows and therefore the
/// flattened layout feeding the dense layer.
struct FieldSchema {
  std::vector<FieldDesc> fields;

  /// Exactly one group and one item field, unique names, positive vocabs.
  void validate() const;
  std::size_t size() const noexcept { return fields.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names_of(FieldKind kind) const;

  friend bool operator==(const FieldSchema&, const FieldSchema&) = default;
};

enum class ScenarioTag { grs, mcgrs, mcgrs_mc, mcgrs_sc };

std::string_view to_string(ScenarioTag tag);
ScenarioTag parse_scenario_tag(std::string_view text);

/// Name of the optional group-size bucket token.
inline constexpr std::string_view kGroupSizeField = "GroupSize";

/// Which fields an experiment feeds the model.
struct Scenario {
  ScenarioTag tag = ScenarioTag::grs;
  // MCGRS_SC: exactly one name. MCGRS_MC: empty means every context.
  std::vector<std::string> contexts;
  bool criteria_active = false;
  bool group_size_token = false;

  static Scenario grs();
  static Scenario mcgrs();
  static Scenario mcgrs_mc(std::vector<std::string> contexts = {});
  static Scenario mcgrs_sc(std::string context);

  void validate() const;
  /// e.g. "GRS", "MCGRS_SC(Class)".
  std::string label() const;
};

/// Restricts `full` to the scenario's fields, preserving order. Throws
/// ConfigError for context names absent from `full`.
FieldSchema scenario_schema(const FieldSchema& full, const Scenario& scenario);

enum class CriteriaEncoding : std::uint8_t {
  categorical = 0,  // one embedding row per rating level
  ordinal = 1,      // single learned vector scaled by the normalized rating
};

struct Hyperparams {
  std::size_t d = 16;
  std::size_t heads = 4;
  std::size_t head_dim = 4;
  std::size_t dense_width = 64;
  double layernorm_eps = 1e-5;
  std::uint64_t seed = 0;
  AttentionScale attention_scale = AttentionScale::head_dim;
  CriteriaEncoding criteria_encoding = CriteriaEncoding::categorical;

  /// Throws ConfigError unless heads*head_dim == d and every count is positive.
  void validate() const;
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// One model input: an index per schema field plus a multiplier applied to
/// the looked-up row (1 for categorical fields).
struct EncodedExample {
  std::vector<std::size_t> indices;
  std::vector<double> values;
  double target = 0.0;
};

struct Model {
  FieldSchema schema;
  Hyperparams hp;
  std::vector<EmbeddingTable> embeddings;  // one per schema field, same order
  MhaParams attention;
  DenseParams hidden;  // (F*d) -> dense_width, ReLU
  DenseParams output;  // dense_width -> 1, linear

  std::size_t field_count() const noexcept { return schema.size(); }
  std::size_t flat_width() const noexcept { return schema.size() * hp.d; }

  /// Every trainable block in declaration order (embeddings by field, Q/K/V
  /// per head, W_O, hidden, output). Pointers stay valid while the model
  /// is neither moved nor reshaped.
  std::vector<ParamBlock> parameters();
};

Model build_model(const FieldSchema& schema, const Hyperparams& hp, SeededRng& rng);
/// Seeds the initializer from hp.seed.
Model build_model(const FieldSchema& schema, const Hyperparams& hp);

struct ModelCache {
  std::vector<std::size_t> indices;  // lookups performed, one per field
  std::vector<double> values;
  Matrix tokens;  // F x d stacked field embeddings
  MhaCache attention;
  LayerNormCache norm;
  DenseCache hidden;
  DenseCache output;
};

struct ModelForward {
  double prediction = 0.0;
  ModelCache cache;
};

/// lookups -> token stack -> attention -> layer norm -> flatten -> dense
/// ReLU -> linear scalar. The prediction is not clamped.
ModelForward model_forward(const Model& model, const EncodedExample& example);
double predict(const Model& model, const EncodedExample& example);

/// Accumulates d(loss)/d(theta) for every block given d(loss)/d(prediction).
void model_backward(Model& model, const ModelCache& cache, double dloss_dpred);

void zero_grads(Model& model);

/// Throws LookupError if any index is out of range for its field.
void check_example(const Model& model, const EncodedExample& example);

/// Single-example squared error (prediction - target)^2 and its gradient
/// in every block, checked against central finite differences. When
/// `corrupt_offset` is non-zero it is added to the first element of the
/// hidden weight gradient before comparison (negative control).
GradCheckReport model_grad_check(Model& model, const EncodedExample& example, double tolerance,
                                 const GradCheckOptions& options = {}, double corrupt_offset = 0.0);

}  // namespace grouprec
