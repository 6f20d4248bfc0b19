#include "grouprec/baseline.hpp"

#include <Eigen/Dense>

#include "grouprec/error.hpp"

namespace grouprec {

LinearBaseline linear_baseline_fit(std::span<const EncodedExample> train, const FieldSchema& schema,
                                   double l2, RatingScale scale) {
  if (!(l2 > 0.0)) throw ArgumentError("linear baseline requires l2 > 0");
  if (train.empty()) throw ArgumentError("linear baseline requires a non-empty training set");
  schema.validate();

  LinearBaseline b;
  b.schema = schema;
  b.scale = scale;
  std::size_t width = 0;
  for (const auto& f : schema.fields) {
    b.offsets.push_back(width);
    width += f.vocab_size;
  }
  const auto n = static_cast<Eigen::Index>(width + 1);  // last column: intercept
  const auto intercept_col = n - 1;

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  std::vector<std::pair<Eigen::Index, double>> active;
  for (const auto& ex : train) {
    if (ex.indices.size() != schema.size()) {
      throw ShapeError("baseline example field count does not match schema");
    }
    active.clear();
    for (std::size_t f = 0; f < schema.size(); ++f) {
      if (ex.indices[f] >= schema.fields[f].vocab_size) {
        throw LookupError("baseline index out of range for field '" + schema.fields[f].name + "'");
      }
      const double v = ex.values.empty() ? 1.0 : ex.values[f];
      active.emplace_back(static_cast<Eigen::Index>(b.offsets[f] + ex.indices[f]), v);
    }
    active.emplace_back(intercept_col, 1.0);
    for (const auto& [i, vi] : active) {
      rhs(i) += vi * ex.target;
      for (const auto& [j, vj] : active) gram(i, j) += vi * vj;
    }
  }
  for (Eigen::Index i = 0; i < intercept_col; ++i) gram(i, i) += l2;

  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  b.weights.assign(beta.data(), beta.data() + intercept_col);
  b.intercept = beta(intercept_col);
  return b;
}

double linear_baseline_predict(const LinearBaseline& baseline, const EncodedExample& example) {
  if (example.indices.size() != baseline.schema.size()) {
    throw ShapeError("baseline example field count does not match schema");
  }
  double y = baseline.intercept;
  for (std::size_t f = 0; f < example.indices.size(); ++f) {
    if (example.indices[f] >= baseline.schema.fields[f].vocab_size) {
      throw LookupError("baseline index out of range for field '" +
                        baseline.schema.fields[f].name + "'");
    }
    const double v = example.values.empty() ? 1.0 : example.values[f];
    y += v * baseline.weights[baseline.offsets[f] + example.indices[f]];
  }
  return baseline.scale.clamp(y);
}

}  // namespace grouprec
