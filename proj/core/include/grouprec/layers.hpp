#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "grouprec/matrix.hpp"
#include "grouprec/rng.hpp"

namespace grouprec {

// Trainable building blocks. Each layer has a forward pass returning its
// output plus a cache, and a backward pass that accumulates into the
// parameter gradients and returns the gradient w.r.t. its input. Backward
// passes never zero gradients; callers do that between optimizer steps.

// ---------------------------------------------------------------------------
// Embedding

struct EmbeddingTable {
  std::string name;
  Matrix weights;  // vocab_size x dim
  Matrix grads;    // same shape

  EmbeddingTable() = default;
  EmbeddingTable(std::string field_name, Matrix initial_weights);

  /// Uniform in [-0.05, 0.05).
  static EmbeddingTable init(std::string field_name, std::size_t vocab_size, std::size_t dim,
                             SeededRng& rng);

  std::size_t vocab_size() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }
};

/// Copy of row `index`. Throws LookupError naming the table and index.
std::vector<double> embed_lookup(const EmbeddingTable& table, std::size_t index);

/// grads.row(index) += upstream.
void embed_backward(EmbeddingTable& table, std::size_t index, std::span<const double> upstream);

// ---------------------------------------------------------------------------
// Multi-head attention over field tokens

enum class AttentionScale {
  head_dim,   // scores divided by sqrt(d_h)
  model_dim,  // scores divided by sqrt(d)
};

struct MhaParams {
  std::size_t heads = 0;
  std::size_t model_dim = 0;
  std::size_t head_dim = 0;
  AttentionScale scale_mode = AttentionScale::head_dim;

  // One projection per head, each model_dim x head_dim.
  std::vector<Matrix> w_q, w_k, w_v;
  std::vector<Matrix> grad_w_q, grad_w_k, grad_w_v;
  Matrix w_o;  // (heads*head_dim) x model_dim
  Matrix grad_w_o;

  /// Throws ConfigError unless heads*head_dim == model_dim and all are positive.
  static MhaParams init(std::size_t model_dim, std::size_t heads, std::size_t head_dim,
                        SeededRng& rng, AttentionScale scale_mode = AttentionScale::head_dim);

  double score_scale() const;
  void zero_grads();
};

struct MhaCache {
  Matrix x;
  std::vector<Matrix> q, k, v;
  std::vector<Matrix> attention;  // per head, F x F, row-stochastic
  Matrix concat;                  // F x (heads*head_dim)
};

struct MhaResult {
  Matrix z;
  MhaCache cache;
};

MhaResult mha_forward(const MhaParams& p, const Matrix& x);
Matrix mha_backward(MhaParams& p, const MhaCache& cache, const Matrix& dz);

// ---------------------------------------------------------------------------
// Layer normalization (no affine parameters), per token row

struct LayerNormCache {
  Matrix normalized;
  std::vector<double> mean;
  std::vector<double> stddev;  // sqrt(var + eps)
};

struct LayerNormResult {
  Matrix y;
  LayerNormCache cache;
};

LayerNormResult layernorm_forward(const Matrix& x, double eps);
Matrix layernorm_backward(const LayerNormCache& cache, const Matrix& dy);

// ---------------------------------------------------------------------------
// Dense

enum class Activation { relu, none };

struct DenseParams {
  Matrix w;  // out x in
  Matrix b;  // out x 1
  Matrix grad_w;
  Matrix grad_b;

  DenseParams() = default;
  DenseParams(Matrix weights, Matrix bias);

  /// Weights uniform in [-1/sqrt(in), 1/sqrt(in)), zero bias.
  static DenseParams init(std::size_t in, std::size_t out, SeededRng& rng);

  std::size_t in_dim() const noexcept { return w.cols(); }
  std::size_t out_dim() const noexcept { return w.rows(); }
  void zero_grads();
};

struct DenseCache {
  std::vector<double> x;
  std::vector<double> pre_activation;
  Activation activation = Activation::none;
};

struct DenseResult {
  std::vector<double> y;
  DenseCache cache;
};

DenseResult dense_forward(const DenseParams& p, std::span<const double> x, Activation activation);
std::vector<double> dense_backward(DenseParams& p, const DenseCache& cache,
                                   std::span<const double> dy);

}  // namespace grouprec
