#include "grouprec/layers.hpp"

#include <cmath>

#include "grouprec/error.hpp"

namespace grouprec {
namespace {

Matrix uniform_fan_in(SeededRng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rng_matrix(rng, rows, cols, -bound, bound);
}

Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t width) {
  Matrix out(m.rows(), width);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < width; ++c) out(r, c) = m(r, begin + c);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Embedding

EmbeddingTable::EmbeddingTable(std::string field_name, Matrix initial_weights)
    : name(std::move(field_name)),
      weights(std::move(initial_weights)),
      grads(weights.rows(), weights.cols()) {}

EmbeddingTable EmbeddingTable::init(std::string field_name, std::size_t vocab_size,
                                    std::size_t dim, SeededRng& rng) {
  return EmbeddingTable(std::move(field_name), rng_matrix(rng, vocab_size, dim, -0.05, 0.05));
}

std::vector<double> embed_lookup(const EmbeddingTable& table, std::size_t index) {
  if (index >= table.vocab_size()) {
    throw LookupError("embedding lookup out of range: field '" + table.name + "' index " +
                      std::to_string(index) + " >= vocab size " +
                      std::to_string(table.vocab_size()));
  }
  auto row = table.weights.row(index);
  return {row.begin(), row.end()};
}

void embed_backward(EmbeddingTable& table, std::size_t index, std::span<const double> upstream) {
  if (index >= table.vocab_size()) {
    throw LookupError("embedding backward out of range: field '" + table.name + "' index " +
                      std::to_string(index) + " >= vocab size " +
                      std::to_string(table.vocab_size()));
  }
  if (upstream.size() != table.dim()) {
    throw ShapeError("embedding backward: upstream length " + std::to_string(upstream.size()) +
                     " != dim " + std::to_string(table.dim()));
  }
  auto g = table.grads.row(index);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += upstream[j];
}

// ---------------------------------------------------------------------------
// Multi-head attention

MhaParams MhaParams::init(std::size_t model_dim, std::size_t heads, std::size_t head_dim,
                          SeededRng& rng, AttentionScale scale_mode) {
  if (model_dim == 0 || heads == 0 || head_dim == 0) {
    throw ConfigError("attention dimensions must be positive");
  }
  if (heads * head_dim != model_dim) {
    throw ConfigError("heads * head_dim must equal model dim (" + std::to_string(heads) + " * " +
                      std::to_string(head_dim) + " != " + std::to_string(model_dim) + ")");
  }
  MhaParams p;
  p.heads = heads;
  p.model_dim = model_dim;
  p.head_dim = head_dim;
  p.scale_mode = scale_mode;
  for (std::size_t i = 0; i < heads; ++i) {
    p.w_q.push_back(uniform_fan_in(rng, model_dim, head_dim, model_dim));
    p.w_k.push_back(uniform_fan_in(rng, model_dim, head_dim, model_dim));
    p.w_v.push_back(uniform_fan_in(rng, model_dim, head_dim, model_dim));
    p.grad_w_q.emplace_back(model_dim, head_dim);
    p.grad_w_k.emplace_back(model_dim, head_dim);
    p.grad_w_v.emplace_back(model_dim, head_dim);
  }
  p.w_o = uniform_fan_in(rng, heads * head_dim, model_dim, heads * head_dim);
  p.grad_w_o = Matrix(heads * head_dim, model_dim);
  return p;
}

double MhaParams::score_scale() const {
  const auto denom = scale_mode == AttentionScale::head_dim ? head_dim : model_dim;
  return 1.0 / std::sqrt(static_cast<double>(denom));
}

void MhaParams::zero_grads() {
  for (auto* group : {&grad_w_q, &grad_w_k, &grad_w_v})
    for (auto& g : *group) g.fill(0.0);
  grad_w_o.fill(0.0);
}

MhaResult mha_forward(const MhaParams& p, const Matrix& x) {
  if (x.cols() != p.model_dim || x.rows() == 0) {
    throw ShapeError("mha_forward: input " + x.shape_string() + " needs F>=1 rows and " +
                     std::to_string(p.model_dim) + " columns");
  }
  const std::size_t tokens = x.rows();
  MhaResult out;
  MhaCache& cache = out.cache;
  cache.x = x;
  cache.concat = Matrix(tokens, p.heads * p.head_dim);
  const double s = p.score_scale();

  for (std::size_t h = 0; h < p.heads; ++h) {
    Matrix q = matmul(x, p.w_q[h]);
    Matrix k = matmul(x, p.w_k[h]);
    Matrix v = matmul(x, p.w_v[h]);
    Matrix attn = softmax_rows(scale(matmul(q, transpose(k)), s));
    Matrix head = matmul(attn, v);
    for (std::size_t r = 0; r < tokens; ++r)
      for (std::size_t c = 0; c < p.head_dim; ++c) cache.concat(r, h * p.head_dim + c) = head(r, c);
    cache.q.push_back(std::move(q));
    cache.k.push_back(std::move(k));
    cache.v.push_back(std::move(v));
    cache.attention.push_back(std::move(attn));
  }
  out.z = matmul(cache.concat, p.w_o);
  return out;
}

Matrix mha_backward(MhaParams& p, const MhaCache& cache, const Matrix& dz) {
  if (cache.attention.size() != p.heads || dz.rows() != cache.x.rows() ||
      dz.cols() != p.model_dim) {
    throw ShapeError("mha_backward: cache/upstream mismatch (dz " + dz.shape_string() + ")");
  }
  const Matrix& x = cache.x;
  const Matrix xt = transpose(x);
  const double s = p.score_scale();

  add_inplace(p.grad_w_o, matmul(transpose(cache.concat), dz));
  const Matrix d_concat = matmul(dz, transpose(p.w_o));

  Matrix dx(x.rows(), x.cols());
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Matrix& a = cache.attention[h];
    const Matrix d_head = column_slice(d_concat, h * p.head_dim, p.head_dim);

    const Matrix d_attn = matmul(d_head, transpose(cache.v[h]));
    const Matrix d_v = matmul(transpose(a), d_head);

    // Softmax Jacobian per row: dS = A * (dA - <dA, A>).
    Matrix d_scores(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) dot += d_attn(r, c) * a(r, c);
      for (std::size_t c = 0; c < a.cols(); ++c)
        d_scores(r, c) = a(r, c) * (d_attn(r, c) - dot) * s;
    }

    const Matrix d_q = matmul(d_scores, cache.k[h]);
    const Matrix d_k = matmul(transpose(d_scores), cache.q[h]);

    add_inplace(p.grad_w_q[h], matmul(xt, d_q));
    add_inplace(p.grad_w_k[h], matmul(xt, d_k));
    add_inplace(p.grad_w_v[h], matmul(xt, d_v));

    add_inplace(dx, matmul(d_q, transpose(p.w_q[h])));
    add_inplace(dx, matmul(d_k, transpose(p.w_k[h])));
    add_inplace(dx, matmul(d_v, transpose(p.w_v[h])));
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Layer normalization

LayerNormResult layernorm_forward(const Matrix& x, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("layernorm eps must be positive");
  LayerNormResult out;
  out.y = Matrix(x.rows(), x.cols());
  out.cache.mean.resize(x.rows());
  out.cache.stddev.resize(x.rows());
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mu = 0.0;
    for (double v : in) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= n;
    const double sigma = std::sqrt(var + eps);
    auto o = out.y.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = (in[c] - mu) / sigma;
    out.cache.mean[r] = mu;
    out.cache.stddev[r] = sigma;
  }
  out.cache.normalized = out.y;
  return out;
}

Matrix layernorm_backward(const LayerNormCache& cache, const Matrix& dy) {
  const Matrix& y = cache.normalized;
  if (!dy.same_shape(y)) {
    throw ShapeError("layernorm_backward: dy " + dy.shape_string() + " vs cache " +
                     y.shape_string());
  }
  Matrix dx(dy.rows(), dy.cols());
  const double n = static_cast<double>(dy.cols());
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto g = dy.row(r);
    auto yr = y.row(r);
    double mean_g = 0.0;
    double mean_gy = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      mean_g += g[c];
      mean_gy += g[c] * yr[c];
    }
    mean_g /= n;
    mean_gy /= n;
    auto o = dx.row(r);
    for (std::size_t c = 0; c < g.size(); ++c)
      o[c] = (g[c] - mean_g - yr[c] * mean_gy) / cache.stddev[r];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense

DenseParams::DenseParams(Matrix weights, Matrix bias)
    : w(std::move(weights)),
      b(std::move(bias)),
      grad_w(w.rows(), w.cols()),
      grad_b(b.rows(), b.cols()) {
  if (b.rows() != w.rows() || b.cols() != 1) {
    throw ShapeError("dense bias " + b.shape_string() + " does not fit weights " +
                     w.shape_string());
  }
}

DenseParams DenseParams::init(std::size_t in, std::size_t out, SeededRng& rng) {
  return DenseParams(uniform_fan_in(rng, out, in, in), Matrix(out, 1));
}

void DenseParams::zero_grads() {
  grad_w.fill(0.0);
  grad_b.fill(0.0);
}

DenseResult dense_forward(const DenseParams& p, std::span<const double> x, Activation activation) {
  if (x.size() != p.in_dim()) {
    throw ShapeError("dense_forward: input length " + std::to_string(x.size()) +
                     " != layer input " + std::to_string(p.in_dim()));
  }
  DenseResult out;
  out.cache.x.assign(x.begin(), x.end());
  out.cache.activation = activation;
  out.cache.pre_activation.resize(p.out_dim());
  out.y.resize(p.out_dim());
  for (std::size_t o = 0; o < p.out_dim(); ++o) {
    double acc = p.b(o, 0);
    auto wr = p.w.row(o);
    for (std::size_t i = 0; i < x.size(); ++i) acc += wr[i] * x[i];
    out.cache.pre_activation[o] = acc;
    out.y[o] = (activation == Activation::relu && acc <= 0.0) ? 0.0 : acc;
  }
  return out;
}

std::vector<double> dense_backward(DenseParams& p, const DenseCache& cache,
                                   std::span<const double> dy) {
  if (dy.size() != p.out_dim() || cache.x.size() != p.in_dim()) {
    throw ShapeError("dense_backward: upstream/cache shape mismatch");
  }
  std::vector<double> dx(p.in_dim(), 0.0);
  for (std::size_t o = 0; o < p.out_dim(); ++o) {
    // ReLU subgradient at 0 is 0.
    const bool active = cache.activation == Activation::none || cache.pre_activation[o] > 0.0;
    const double g = active ? dy[o] : 0.0;
    if (g == 0.0) continue;
    p.grad_b(o, 0) += g;
    auto gw = p.grad_w.row(o);
    auto wr = p.w.row(o);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      gw[i] += g * cache.x[i];
      dx[i] += g * wr[i];
    }
  }
  return dx;
}

}  // namespace grouprec
