#include <gtest/gtest.h>

#include <cmath>

#include "grouprec/error.hpp"
#include "grouprec/matrix.hpp"
#include "grouprec/rng.hpp"
#include "oracles.hpp"

using namespace grouprec;

TEST(Matrix, MatmulSmallKnown) {
  const auto a = Matrix::from_rows({{1, 2}, {3, 4}});
  const auto b = Matrix::from_rows({{5, 6}, {7, 8}});
  EXPECT_EQ(matmul(a, b), Matrix::from_rows({{19, 22}, {43, 50}}));
}

TEST(Matrix, MatmulShapeMismatchNamesShapes) {
  const Matrix a(2, 3), b(2, 3);
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Matrix, MatmulMatchesNaive) {
  SeededRng rng(3);
  const auto a = rng_matrix(rng, 4, 7, -1, 1);
  const auto b = rng_matrix(rng, 7, 5, -1, 1);
  const auto want = oracle::naive_matmul(oracle::to_grid(a), oracle::to_grid(b));
  const auto got = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(got(i, j), want[i][j], 1e-12);
}

TEST(Matrix, MatmulAssociative) {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = rng_matrix(rng, 3, 4, -2, 2);
    const auto b = rng_matrix(rng, 4, 5, -2, 2);
    const auto c = rng_matrix(rng, 5, 2, -2, 2);
    EXPECT_LT(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-12);
  }
}

TEST(Matrix, IdentityAndTranspose) {
  SeededRng rng(5);
  const auto a = rng_matrix(rng, 3, 4, -1, 1);
  EXPECT_EQ(matmul(Matrix::identity(3), a), a);
  EXPECT_EQ(transpose(transpose(a)), a);
  EXPECT_EQ(transpose(a)(2, 1), a(1, 2));
}

TEST(Matrix, SoftmaxRowsSumToOneAndShiftInvariant) {
  SeededRng rng(9);
  const auto a = rng_matrix(rng, 6, 5, -30, 30);
  const auto s = softmax_rows(a);
  Matrix shifted = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (double& v : shifted.row(r)) v += 100.0 * static_cast<double>(r);
  const auto t = softmax_rows(shifted);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double total = 0.0;
    for (double v : s.row(r)) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_LT(max_abs_diff(s, t), 1e-12);
}

TEST(Matrix, SoftmaxLargeInputsStayFinite) {
  const auto s = softmax_rows(Matrix::from_rows({{1000, 1000, -1000}}));
  EXPECT_NEAR(s(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(s(0, 2), 0.0, 1e-12);
}

TEST(Matrix, SoftmaxRejectsNan) {
  EXPECT_THROW(softmax_rows(Matrix::from_rows({{1.0, std::nan("")}})), NumericError);
}

TEST(Matrix, Elementwise) {
  const auto a = Matrix::from_rows({{1, 2}});
  const auto b = Matrix::from_rows({{3, 5}});
  EXPECT_EQ(add(a, b), Matrix::from_rows({{4, 7}}));
  EXPECT_EQ(sub(a, b), Matrix::from_rows({{-2, -3}}));
  EXPECT_EQ(hadamard(a, b), Matrix::from_rows({{3, 10}}));
  EXPECT_EQ(scale(a, -2), Matrix::from_rows({{-2, -4}}));
  EXPECT_THROW(add(a, Matrix(2, 1)), ShapeError);
  Matrix c = a;
  add_inplace(c, b);
  EXPECT_EQ(c, add(a, b));
}

TEST(Matrix, FromRowsRejectsRagged) {
  EXPECT_THROW(Matrix::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST(Matrix, AllFinite) {
  Matrix m(2, 2, 1.0);
  EXPECT_TRUE(all_finite(m));
  m(1, 1) = INFINITY;
  EXPECT_FALSE(all_finite(m));
}
