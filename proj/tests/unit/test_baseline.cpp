#include <gtest/gtest.h>

#include "grouprec/baseline.hpp"
#include "grouprec/error.hpp"
#include "oracles.hpp"

using namespace grouprec;

TEST(Baseline, ConstantRatings) {
  const auto schema = oracle::toy_schema(3, 4);
  SeededRng rng(0);
  std::vector<EncodedExample> train;
  for (int i = 0; i < 50; ++i) {
    EncodedExample ex;
    for (const auto& f : schema.fields) ex.indices.push_back(rng.below(f.vocab_size));
    ex.target = 4.0;
    train.push_back(ex);
  }
  const auto b = linear_baseline_fit(train, schema, 1.0);
  for (const auto& ex : train) EXPECT_NEAR(linear_baseline_predict(b, ex), 4.0, 1e-6);
}

TEST(Baseline, RecoversOneHotEffects) {
  FieldSchema schema;
  schema.fields = {{"g", FieldKind::group, 3}, {"i", FieldKind::item, 1}};
  // Rating = 2 + effect[g]; tiny l2 makes the ridge solution exact to 1e-6.
  const double effect[3] = {0.0, 1.0, 2.5};
  std::vector<EncodedExample> train;
  for (std::size_t rep = 0; rep < 10; ++rep)
    for (std::size_t g = 0; g < 3; ++g) train.push_back({{g, 0}, {}, 2.0 + effect[g]});
  const auto b = linear_baseline_fit(train, schema, 1e-9);
  for (std::size_t g = 0; g < 3; ++g) {
    EXPECT_NEAR(linear_baseline_predict(b, {{g, 0}, {}, 0}), 2.0 + effect[g], 1e-6);
  }
}

TEST(Baseline, Rejections) {
  const auto schema = oracle::toy_schema(2);
  std::vector<EncodedExample> one{{{0, 0}, {}, 3.0}};
  EXPECT_THROW(linear_baseline_fit(one, schema, 0.0), ArgumentError);
  EXPECT_THROW(linear_baseline_fit({}, schema, 1.0), ArgumentError);
}

TEST(Baseline, PredictionClamped) {
  FieldSchema schema;
  schema.fields = {{"g", FieldKind::group, 2}, {"i", FieldKind::item, 1}};
  std::vector<EncodedExample> train(5, EncodedExample{{0, 0}, {}, 9.0});
  const auto b = linear_baseline_fit(train, schema, 1.0);
  EXPECT_EQ(linear_baseline_predict(b, {{0, 0}, {}, 0}), 5.0);
}
