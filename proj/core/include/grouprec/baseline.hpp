#pragma once

#include <span>
#include <vector>

#include "grouprec/model.hpp"
#include "grouprec/scale.hpp"

namespace grouprec {

/// Ridge regression on one-hot field indicators with an unpenalized
/// intercept. Serves as the reference point for the attention model.
struct LinearBaseline {
  FieldSchema schema;
  RatingScale scale;
  std::vector<std::size_t> offsets;  // first indicator column per field
  std::vector<double> weights;
  double intercept = 0.0;
};

/// Solves (X'X + l2*P) beta = X'y, P = identity except the intercept entry.
/// Throws ArgumentError for l2 <= 0 or an empty training set.
LinearBaseline linear_baseline_fit(std::span<const EncodedExample> train, const FieldSchema& schema,
                                   double l2, RatingScale scale = {});

/// Clamped to the rating scale.
double linear_baseline_predict(const LinearBaseline& baseline, const EncodedExample& example);

}  // namespace grouprec
