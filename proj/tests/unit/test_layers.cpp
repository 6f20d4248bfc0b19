#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "grouprec/error.hpp"
#include "grouprec/grad_check.hpp"
#include "grouprec/layers.hpp"
#include "grouprec/rng.hpp"
#include "oracles.hpp"

using namespace grouprec;

namespace {

double weighted_sum(const Matrix& out, const Matrix& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * w.values()[i];
  return s;
}

// Central differences of f w.r.t. every element of x.
Matrix numeric_input_grad(Matrix& x, const std::function<double()>& f, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.values()[i];
    x.values()[i] = keep + h;
    const double up = f();
    x.values()[i] = keep - h;
    const double down = f();
    x.values()[i] = keep;
    g.values()[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Embedding, LookupAndBackward) {
  SeededRng rng(0);
  auto table = EmbeddingTable::init("Class", 4, 3, rng);
  for (double v : table.weights.values()) {
    EXPECT_GE(v, -0.05);
    EXPECT_LT(v, 0.05);
  }
  const auto row = embed_lookup(table, 2);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(row[j], table.weights(2, j));
  const std::vector<double> up{1, 2, 3};
  embed_backward(table, 2, up);
  embed_backward(table, 2, up);
  EXPECT_EQ(table.grads(2, 1), 4.0);
  EXPECT_EQ(table.grads(1, 1), 0.0);
}

TEST(Embedding, OutOfRangeNamesField) {
  SeededRng rng(0);
  const auto table = EmbeddingTable::init("Semester", 3, 2, rng);
  try {
    embed_lookup(table, 3);
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find("Semester"), std::string::npos);
  }
}

TEST(Attention, MatchesLonghandOracle) {
  SeededRng rng(7);
  const auto p = MhaParams::init(4, 2, 2, rng);
  const auto x = rng_matrix(rng, 3, 4, -1, 1);
  const auto got = mha_forward(p, x);
  const auto want = oracle::naive_mha(p, oracle::to_grid(x));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got.z(i, j), want.z[i][j], 1e-9);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        EXPECT_NEAR(got.cache.attention[h](i, j), want.weights[h][i][j], 1e-9);
}

TEST(Attention, ModelDimScaleOption) {
  SeededRng rng(8);
  auto p = MhaParams::init(8, 2, 4, rng, AttentionScale::model_dim);
  EXPECT_DOUBLE_EQ(p.score_scale(), 1.0 / std::sqrt(8.0));
  const auto x = rng_matrix(rng, 4, 8, -1, 1);
  const auto want = oracle::naive_mha(p, oracle::to_grid(x));
  const auto got = mha_forward(p, x);
  EXPECT_NEAR(got.z(3, 7), want.z[3][7], 1e-9);
  p.scale_mode = AttentionScale::head_dim;
  EXPECT_DOUBLE_EQ(p.score_scale(), 0.5);
}

TEST(Attention, RejectsHeadMismatch) {
  SeededRng rng(0);
  EXPECT_THROW(MhaParams::init(16, 3, 4, rng), ConfigError);
}

TEST(Attention, RowsAreDistributions) {
  SeededRng rng(1);
  const auto p = MhaParams::init(8, 4, 2, rng);
  const auto x = rng_matrix(rng, 6, 8, -3, 3);
  const auto r = mha_forward(p, x);
  for (const auto& a : r.cache.attention)
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (double v : a.row(i)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Attention, PermutationEquivariant) {
  SeededRng rng(2);
  const auto p = MhaParams::init(8, 2, 4, rng);
  const auto x = rng_matrix(rng, 5, 8, -1, 1);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Matrix px(5, 8);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 8; ++j) px(i, j) = x(perm[i], j);
  const auto z = mha_forward(p, x).z;
  const auto pz = mha_forward(p, px).z;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(pz(i, j), z(perm[i], j), 1e-9);
}

TEST(Attention, BackwardMatchesFiniteDifferences) {
  SeededRng rng(3);
  auto p = MhaParams::init(6, 3, 2, rng);
  Matrix x = rng_matrix(rng, 4, 6, -1, 1);
  const auto w = rng_matrix(rng, 4, 6, -1, 1);
  auto loss = [&] { return weighted_sum(mha_forward(p, x).z, w); };

  p.zero_grads();
  const auto fwd = mha_forward(p, x);
  const Matrix dx = mha_backward(p, fwd.cache, w);

  std::vector<ParamBlock> blocks;
  for (std::size_t h = 0; h < 3; ++h) {
    blocks.push_back({"q", &p.w_q[h], &p.grad_w_q[h]});
    blocks.push_back({"k", &p.w_k[h], &p.grad_w_k[h]});
    blocks.push_back({"v", &p.w_v[h], &p.grad_w_v[h]});
  }
  blocks.push_back({"o", &p.w_o, &p.grad_w_o});
  const auto report = grad_check(loss, blocks, 1e-5);
  for (const auto& b : report.blocks) EXPECT_TRUE(b.passed) << b.name << " " << b.max_rel_error;

  const Matrix ndx = numeric_input_grad(x, loss);
  EXPECT_LT(max_abs_diff(dx, ndx), 1e-8);
}

TEST(LayerNorm, MatchesOracleAndNormalizes) {
  SeededRng rng(4);
  const auto x = rng_matrix(rng, 5, 8, -4, 4);
  const auto y = layernorm_forward(x, 1e-5).y;
  const auto want = oracle::naive_layernorm(oracle::to_grid(x), 1e-5);
  for (std::size_t i = 0; i < 5; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_NEAR(y(i, j), want[i][j], 1e-12);
      mean += y(i, j);
    }
    EXPECT_NEAR(mean / 8, 0.0, 1e-9);
  }
}

TEST(LayerNorm, UnitVarianceWithTinyEps) {
  SeededRng rng(5);
  const auto x = rng_matrix(rng, 4, 16, -2, 2);
  const auto y = layernorm_forward(x, 1e-12).y;
  for (std::size_t i = 0; i < 4; ++i) {
    double var = 0.0;
    for (double v : y.row(i)) var += v * v;
    EXPECT_NEAR(var / 16, 1.0, 1e-6);
  }
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  const auto y = layernorm_forward(Matrix(2, 4, 3.0), 1e-5).y;
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(layernorm_forward(Matrix(1, 2), 0.0), ArgumentError);
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  SeededRng rng(6);
  Matrix x = rng_matrix(rng, 3, 5, -1, 1);
  const auto w = rng_matrix(rng, 3, 5, -1, 1);
  auto loss = [&] { return weighted_sum(layernorm_forward(x, 1e-5).y, w); };
  const auto fwd = layernorm_forward(x, 1e-5);
  const Matrix dx = layernorm_backward(fwd.cache, w);
  EXPECT_LT(max_abs_diff(dx, numeric_input_grad(x, loss)), 1e-7);
}

TEST(Dense, ForwardKnownValues) {
  DenseParams p(Matrix::from_rows({{1, -1}, {2, 0}}), Matrix::from_rows({{0.5}, {-3}}));
  const std::vector<double> x{2, 1};
  const auto relu = dense_forward(p, x, Activation::relu);
  EXPECT_EQ(relu.y, (std::vector<double>{1.5, 1.0}));
  const auto lin = dense_forward(p, std::vector<double>{0, 0}, Activation::relu);
  EXPECT_EQ(lin.y, (std::vector<double>{0.5, 0.0}));
  const auto none = dense_forward(p, std::vector<double>{-1, 0}, Activation::none);
  EXPECT_EQ(none.y, (std::vector<double>{-0.5, -5.0}));
}

TEST(Dense, InitRange) {
  SeededRng rng(0);
  const auto p = DenseParams::init(16, 4, rng);
  for (double v : p.w.values()) EXPECT_LE(std::abs(v), 0.25);
  for (double v : p.b.values()) EXPECT_EQ(v, 0.0);
}

TEST(Dense, BackwardMatchesFiniteDifferences) {
  SeededRng rng(7);
  auto p = DenseParams::init(6, 5, rng);
  for (double& v : p.b.values()) v = rng.uniform(-0.3, 0.3);
  Matrix x = rng_matrix(rng, 1, 6, -1, 1);
  const auto w = rng_matrix(rng, 1, 5, -1, 1);
  for (auto act : {Activation::relu, Activation::none}) {
    auto loss = [&] {
      const auto y = dense_forward(p, x.values(), act).y;
      return weighted_sum(Matrix(1, 5, y), w);
    };
    p.zero_grads();
    const auto fwd = dense_forward(p, x.values(), act);
    const auto dx = dense_backward(p, fwd.cache, w.values());
    std::vector<ParamBlock> blocks{{"w", &p.w, &p.grad_w}, {"b", &p.b, &p.grad_b}};
    EXPECT_TRUE(grad_check(loss, blocks, 1e-6).passed());
    EXPECT_LT(max_abs_diff(Matrix(1, 6, dx), numeric_input_grad(x, loss)), 1e-8);
  }
}
