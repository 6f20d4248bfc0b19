#include <gtest/gtest.h>

#include <cmath>

#include "grouprec/error.hpp"
#include "grouprec/model.hpp"
#include "oracles.hpp"

using namespace grouprec;
using grouprec::oracle::toy_schema;

namespace {

Hyperparams small_hp(std::uint64_t seed = 0) {
  Hyperparams hp;
  hp.d = 8;
  hp.heads = 2;
  hp.head_dim = 4;
  hp.dense_width = 12;
  hp.seed = seed;
  return hp;
}

FieldSchema full_schema() {
  FieldSchema s;
  s.fields = {{"group", FieldKind::group, 144},   {"item", FieldKind::item, 71},
              {"Class", FieldKind::context, 4},   {"Semester", FieldKind::context, 3},
              {"Lockdown", FieldKind::context, 3}, {"App", FieldKind::criterion, 6},
              {"Data", FieldKind::criterion, 6},  {"Ease", FieldKind::criterion, 6}};
  return s;
}

std::vector<std::string> names(const FieldSchema& s) {
  std::vector<std::string> out;
  for (const auto& f : s.fields) out.push_back(f.name);
  return out;
}

}  // namespace

TEST(Model, SameSeedSameParameters) {
  auto a = build_model(toy_schema(4), small_hp(3));
  auto b = build_model(toy_schema(4), small_hp(3));
  auto c = build_model(toy_schema(4), small_hp(4));
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(*pa[i].value, *pb[i].value) << pa[i].name;
    differs |= !(*pa[i].value == *pc[i].value);
  }
  EXPECT_TRUE(differs);
}

TEST(Model, DenseInputWidthIsFieldsTimesD) {
  Hyperparams hp;
  const auto m = build_model(toy_schema(5), hp);
  EXPECT_EQ(m.flat_width(), 80u);
  EXPECT_EQ(m.hidden.in_dim(), 80u);
}

TEST(Model, HeadDivisibility) {
  Hyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.heads = 3;
  EXPECT_THROW(build_model(toy_schema(3), hp), ConfigError);
}

TEST(Model, ConstantHead) {
  auto m = build_model(toy_schema(4), small_hp());
  m.output.w.fill(0.0);
  m.output.b(0, 0) = 3.0;
  SeededRng rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(predict(m, oracle::random_example(m, rng)), 3.0);
}

TEST(Model, ForwardMatchesLonghand) {
  auto m = build_model(toy_schema(6), Hyperparams{});
  SeededRng rng(0);
  for (int i = 0; i < 10; ++i) {
    const auto ex = oracle::random_example(m, rng);
    EXPECT_NEAR(predict(m, ex), oracle::naive_forward(m, ex), 1e-9);
  }
}

TEST(Model, OrdinalValuesScaleTokens) {
  auto m = build_model(toy_schema(4), small_hp());
  SeededRng rng(2);
  auto ex = oracle::random_example(m, rng);
  ex.values = {1.0, 1.0, 1.0, 0.25};
  EXPECT_NEAR(predict(m, ex), oracle::naive_forward(m, ex), 1e-12);
}

TEST(Model, LookupErrorOnBadIndex) {
  auto m = build_model(toy_schema(3), small_hp());
  EncodedExample ex{{0, 0, 99}, {}, 0.0};
  EXPECT_THROW(predict(m, ex), LookupError);
  EncodedExample short_ex{{0, 0}, {}, 0.0};
  EXPECT_THROW(predict(m, short_ex), ShapeError);
}

TEST(Model, GradCheckAllBlocks) {
  auto m = build_model(toy_schema(6), small_hp(5));
  SeededRng rng(5);
  const auto ex = oracle::random_example(m, rng, 4.0);
  const auto report = model_grad_check(m, ex, 1e-3);
  for (const auto& b : report.blocks) EXPECT_TRUE(b.passed) << b.name << " " << b.max_rel_error;
  EXPECT_EQ(report.blocks.size(), m.parameters().size());
}

TEST(Model, GradCheckCorruptFails) {
  auto m = build_model(toy_schema(6), small_hp(5));
  SeededRng rng(5);
  const auto report = model_grad_check(m, oracle::random_example(m, rng, 4.0), 1e-3, {}, 0.1);
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.worst()->name, "hidden.w");
}

TEST(Model, BackwardZeroUpstreamLeavesGrads) {
  auto m = build_model(toy_schema(4), small_hp());
  SeededRng rng(6);
  const auto fwd = model_forward(m, oracle::random_example(m, rng));
  model_backward(m, fwd.cache, 0.0);
  for (const auto& b : m.parameters())
    for (double v : b.grad->values()) EXPECT_EQ(v, 0.0);
}

TEST(Model, BackwardAccumulatesLinearly) {
  auto m = build_model(toy_schema(4), small_hp(8));
  SeededRng rng(8);
  const auto e1 = oracle::random_example(m, rng);
  const auto e2 = oracle::random_example(m, rng);
  auto grads_of = [&](std::vector<const EncodedExample*> exs) {
    zero_grads(m);
    for (const auto* e : exs) model_backward(m, model_forward(m, *e).cache, 0.7);
    std::vector<Matrix> out;
    for (const auto& b : m.parameters()) out.push_back(*b.grad);
    return out;
  };
  const auto g1 = grads_of({&e1});
  const auto g2 = grads_of({&e2});
  const auto both = grads_of({&e1, &e2});
  for (std::size_t i = 0; i < both.size(); ++i) EXPECT_LT(max_abs_diff(both[i], add(g1[i], g2[i])), 1e-14);
}

TEST(Model, ZeroGradsIdempotentAndKeepsParams) {
  auto m = build_model(toy_schema(4), small_hp());
  SeededRng rng(9);
  const auto fwd = model_forward(m, oracle::random_example(m, rng));
  model_backward(m, fwd.cache, 1.0);
  std::vector<Matrix> before;
  for (const auto& b : m.parameters()) before.push_back(*b.value);
  zero_grads(m);
  zero_grads(m);
  const auto blocks = m.parameters();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    EXPECT_EQ(*blocks[i].value, before[i]);
    for (double v : blocks[i].grad->values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Scenario, SchemaRestriction) {
  const auto full = full_schema();
  EXPECT_EQ(names(scenario_schema(full, Scenario::grs())), (std::vector<std::string>{"group", "item"}));
  EXPECT_EQ(names(scenario_schema(full, Scenario::mcgrs())),
            (std::vector<std::string>{"group", "item", "App", "Data", "Ease"}));
  EXPECT_EQ(names(scenario_schema(full, Scenario::mcgrs_sc("Class"))),
            (std::vector<std::string>{"group", "item", "Class", "App", "Data", "Ease"}));
  EXPECT_EQ(names(scenario_schema(full, Scenario::mcgrs_mc())),
            (std::vector<std::string>{"group", "item", "Class", "Semester", "Lockdown", "App", "Data",
                                      "Ease"}));
  EXPECT_EQ(names(scenario_schema(full, Scenario::mcgrs_mc({"Lockdown"}))),
            (std::vector<std::string>{"group", "item", "Lockdown", "App", "Data", "Ease"}));
  auto sized = Scenario::mcgrs_sc("Class");
  sized.group_size_token = true;
  const auto s = scenario_schema(full, sized);
  EXPECT_EQ(names(s), (std::vector<std::string>{"group", "item", "Class", "GroupSize", "App", "Data", "Ease"}));
  EXPECT_EQ(sized.label(), "MCGRS_SC(Class)+size");
}

TEST(Scenario, Errors) {
  EXPECT_THROW(scenario_schema(full_schema(), Scenario::mcgrs_sc("Weather")), ConfigError);
  EXPECT_THROW(parse_scenario_tag("XYZ"), ConfigError);
  EXPECT_EQ(parse_scenario_tag("MCGRS_MC"), ScenarioTag::mcgrs_mc);
  Scenario bad = Scenario::grs();
  bad.criteria_active = true;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Scenario, GrsModelReadsOnlyGroupAndItem) {
  const auto schema = scenario_schema(full_schema(), Scenario::grs());
  auto m = build_model(schema, small_hp());
  EXPECT_EQ(m.field_count(), 2u);
  EXPECT_EQ(m.embeddings[0].name, "group");
  EXPECT_EQ(m.embeddings[1].name, "item");
}

TEST(Schema, Validation) {
  FieldSchema s = toy_schema(3);
  s.fields[1].kind = FieldKind::group;
  EXPECT_THROW(s.validate(), ConfigError);
  s = toy_schema(3);
  s.fields[2].name = "f0";
  EXPECT_THROW(s.validate(), ConfigError);
  s = toy_schema(3);
  s.fields[2].vocab_size = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}
