#pragma once

// Single-layer LSTM with a frozen random embedding matrix that doubles as the
// tied output projection (single storage, no output bias). Forward runs from
// the zero state over a fixed-length token sequence; the logits are E * h_n.
// Backward is exact BPTT over the trainable parameters {W_x, W_h, b} only.
//
// Gate layout inside the 4d block is (i, f, g, o).

#include <cstdint>
#include <span>
#include <vector>

#include "seqrecall/numkit.hpp"

namespace seqrecall {

struct ModelConfig {
  int32_t V = 0;
  int d = 0;  // hidden size; the embedding size is tied to it
  uint64_t seed = 0;
  double init_scale = 0.0;  // 0 -> 1/sqrt(d)

  double scale() const { return init_scale > 0.0 ? init_scale : 1.0 / std::sqrt(double(d)); }
};

struct LSTMParams {
  ModelConfig config;
  Matrix E;    // V x d, frozen; also the output projection
  Matrix W_x;  // 4d x d
  Matrix W_h;  // 4d x d
  Vector b;    // 4d

  int32_t V() const { return config.V; }
  int d() const { return config.d; }
};

struct LSTMState {
  Vector h;
  Vector c;
};

// Everything BPTT needs, one B x * matrix per timestep.
struct ForwardCache {
  int B = 0;
  int n = 0;
  std::vector<int32_t> tokens;     // B * n, example-major
  std::vector<Matrix> gates;       // n of (B x 4d), post-activation (i, f, g, o)
  std::vector<Matrix> c;           // n of (B x d)
  std::vector<Matrix> tanh_c;      // n of (B x d)
  std::vector<Matrix> h;           // n of (B x d)
  Matrix logits;                   // B x V
};

struct Gradients {
  Matrix W_x;
  Matrix W_h;
  Vector b;
};

inline LSTMParams init_model(const ModelConfig& config) {
  if (config.V < 2) throw std::invalid_argument("init_model: V must be >= 2");
  if (config.d < 1) throw std::invalid_argument("init_model: d must be >= 1");
  const double scale = config.scale();
  RandomStream root(config.seed, "model-init");
  LSTMParams p;
  p.config = config;
  p.E = init_uniform(root.derive("embedding"), config.V, config.d, scale);
  p.W_x = init_uniform(root.derive("w-x"), 4 * config.d, config.d, scale);
  p.W_h = init_uniform(root.derive("w-h"), 4 * config.d, config.d, scale);
  p.b = Vector::Zero(4 * config.d);
  p.b.segment(config.d, config.d).setOnes();  // forget-gate slice starts at +1
  return p;
}

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void check_tokens(const LSTMParams& p, std::span<const int32_t> tokens) {
  for (int32_t t : tokens)
    if (t < 0 || t >= p.V())
      throw std::invalid_argument("forward: token id out of range");
}

// Gather embedding rows for one timestep across the batch.
inline void gather_embeddings(const LSTMParams& p, const int32_t* tokens, int B, int n, int t,
                              Matrix& X) {
  for (int e = 0; e < B; ++e) X.row(e) = p.E.row(tokens[static_cast<size_t>(e) * n + t]);
}

}  // namespace detail

// One recurrence step; pure function of (params, state, x).
inline LSTMState lstm_step(const LSTMParams& p, const LSTMState& state, const Vector& x) {
  const int d = p.d();
  if (x.size() != d || state.h.size() != d || state.c.size() != d)
    throw std::invalid_argument("lstm_step: dimension mismatch");
  Vector a = p.W_x * x + p.W_h * state.h + p.b;
  LSTMState out;
  out.h.resize(d);
  out.c.resize(d);
  for (int j = 0; j < d; ++j) {
    const double i = detail::sigmoid(a[j]);
    const double f = detail::sigmoid(a[d + j]);
    const double g = std::tanh(a[2 * d + j]);
    const double o = detail::sigmoid(a[3 * d + j]);
    out.c[j] = f * state.c[j] + i * g;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

// Batched forward with cache. `tokens` is example-major: B rows of n ids.
inline ForwardCache forward_batch(const LSTMParams& p, std::span<const int32_t> tokens, int B,
                                  int n) {
  if (B < 1 || n < 1 || static_cast<int64_t>(tokens.size()) != int64_t(B) * n)
    throw std::invalid_argument("forward_batch: bad batch shape");
  detail::check_tokens(p, tokens);
  const int d = p.d();

  ForwardCache cache;
  cache.B = B;
  cache.n = n;
  cache.tokens.assign(tokens.begin(), tokens.end());
  cache.gates.resize(n);
  cache.c.resize(n);
  cache.tanh_c.resize(n);
  cache.h.resize(n);

  Matrix X(B, d);
  Matrix H = Matrix::Zero(B, d);
  Matrix C = Matrix::Zero(B, d);
  for (int t = 0; t < n; ++t) {
    detail::gather_embeddings(p, tokens.data(), B, n, t, X);
    Matrix A(B, 4 * d);
    A.noalias() = X * p.W_x.transpose();
    A.noalias() += H * p.W_h.transpose();
    A.rowwise() += p.b.transpose();
    auto I = A.middleCols(0, d).array();
    auto F = A.middleCols(d, d).array();
    auto G = A.middleCols(2 * d, d).array();
    auto O = A.middleCols(3 * d, d).array();
    I = 1.0 / (1.0 + (-I).exp());
    F = 1.0 / (1.0 + (-F).exp());
    G = G.tanh();
    O = 1.0 / (1.0 + (-O).exp());
    C.array() = F * C.array() + I * G;
    cache.tanh_c[t] = C.array().tanh().matrix();
    H.array() = O * cache.tanh_c[t].array();
    cache.gates[t] = std::move(A);
    cache.c[t] = C;
    cache.h[t] = H;
  }
  cache.logits.noalias() = H * p.E.transpose();
  return cache;
}

// Forward without cache; returns logits only. Used for evaluation.
inline Matrix forward_logits_batch(const LSTMParams& p, std::span<const int32_t> tokens, int B,
                                   int n) {
  if (B < 1 || n < 1 || static_cast<int64_t>(tokens.size()) != int64_t(B) * n)
    throw std::invalid_argument("forward_logits_batch: bad batch shape");
  detail::check_tokens(p, tokens);
  const int d = p.d();
  Matrix X(B, d), A(B, 4 * d);
  Matrix H = Matrix::Zero(B, d);
  Matrix C = Matrix::Zero(B, d);
  for (int t = 0; t < n; ++t) {
    detail::gather_embeddings(p, tokens.data(), B, n, t, X);
    A.noalias() = X * p.W_x.transpose();
    A.noalias() += H * p.W_h.transpose();
    A.rowwise() += p.b.transpose();
    auto I = A.middleCols(0, d).array();
    auto F = A.middleCols(d, d).array();
    auto G = A.middleCols(2 * d, d).array();
    auto O = A.middleCols(3 * d, d).array();
    I = 1.0 / (1.0 + (-I).exp());
    F = 1.0 / (1.0 + (-F).exp());
    G = G.tanh();
    O = 1.0 / (1.0 + (-O).exp());
    C.array() = F * C.array() + I * G;
    H.array() = O * C.array().tanh();
  }
  Matrix logits(B, p.V());
  logits.noalias() = H * p.E.transpose();
  return logits;
}

// Single-example forward: logits = E * h_n plus the cache for backward.
inline ForwardCache forward(const LSTMParams& p, std::span<const int32_t> tokens) {
  if (tokens.empty()) throw std::invalid_argument("forward: empty token sequence");
  return forward_batch(p, tokens, 1, static_cast<int>(tokens.size()));
}

// Mean cross-entropy over the batch and its gradient w.r.t. the trainable
// parameters. No gradient flows to E on either the embedding or projection
// side; it is frozen.
inline double backward_batch(const LSTMParams& p, const ForwardCache& cache,
                             std::span<const int32_t> labels, Gradients& grads) {
  const int B = cache.B, n = cache.n, d = p.d();
  if (static_cast<int>(labels.size()) != B)
    throw std::invalid_argument("backward_batch: label count mismatch");
  for (int32_t lab : labels)
    if (lab < 0 || lab >= p.V()) throw std::invalid_argument("backward_batch: label out of range");

  // Fused softmax + cross-entropy on the cached logits.
  Matrix dlogits(B, p.V());
  double loss = 0.0;
  for (int e = 0; e < B; ++e) {
    const double* row = cache.logits.data() + static_cast<size_t>(e) * p.V();
    const double lse = log_sum_exp(row, p.V());
    loss += lse - row[labels[e]];
    dlogits.row(e) = ((cache.logits.row(e).array() - lse).exp()) / double(B);
    dlogits(e, labels[e]) -= 1.0 / double(B);
  }
  loss /= double(B);
  if (!std::isfinite(loss)) throw NumericError("backward_batch: non-finite loss");

  grads.W_x = Matrix::Zero(4 * d, d);
  grads.W_h = Matrix::Zero(4 * d, d);
  grads.b = Vector::Zero(4 * d);

  Matrix dH(B, d), dC = Matrix::Zero(B, d), dA(B, 4 * d), X(B, d);
  dH.noalias() = dlogits * p.E;

  for (int t = n - 1; t >= 0; --t) {
    const auto I = cache.gates[t].middleCols(0, d).array();
    const auto F = cache.gates[t].middleCols(d, d).array();
    const auto G = cache.gates[t].middleCols(2 * d, d).array();
    const auto O = cache.gates[t].middleCols(3 * d, d).array();
    const auto TanhC = cache.tanh_c[t].array();

    dC.array() += dH.array() * O * (1.0 - TanhC * TanhC);
    dA.middleCols(0, d).array() = dC.array() * G * I * (1.0 - I);
    if (t > 0) {
      dA.middleCols(d, d).array() = dC.array() * cache.c[t - 1].array() * F * (1.0 - F);
    } else {
      dA.middleCols(d, d).setZero();  // c_0 = 0
    }
    dA.middleCols(2 * d, d).array() = dC.array() * I * (1.0 - G * G);
    dA.middleCols(3 * d, d).array() = dH.array() * TanhC * O * (1.0 - O);

    detail::gather_embeddings(p, cache.tokens.data(), B, n, t, X);
    grads.W_x.noalias() += dA.transpose() * X;
    if (t > 0) grads.W_h.noalias() += dA.transpose() * cache.h[t - 1];
    grads.b.noalias() += dA.colwise().sum().transpose();

    if (t > 0) {
      dH.noalias() = dA * p.W_h;
      dC.array() *= F;
    }
  }
  return loss;
}

// Single-example backward against one label.
inline double backward(const LSTMParams& p, const ForwardCache& cache, int32_t label,
                       Gradients& grads) {
  const int32_t labels[1] = {label};
  return backward_batch(p, cache, labels, grads);
}

// Argmax of the forward logits; ties break toward the lowest id.
inline int32_t predict(const LSTMParams& p, std::span<const int32_t> tokens) {
  const Matrix logits = forward_logits_batch(p, tokens, 1, static_cast<int>(tokens.size()));
  return static_cast<int32_t>(argmax_lowest(logits.data(), logits.cols()));
}

// All intermediate (h_t, c_t), t = 1..n; same computation as forward.
inline std::vector<LSTMState> record_states(const LSTMParams& p,
                                            std::span<const int32_t> tokens) {
  const ForwardCache cache = forward(p, tokens);
  std::vector<LSTMState> out(static_cast<size_t>(cache.n));
  for (int t = 0; t < cache.n; ++t) {
    out[t].h = cache.h[t].row(0).transpose();
    out[t].c = cache.c[t].row(0).transpose();
  }
  return out;
}

inline double grad_squared_norm(const Gradients& g) {
  return g.W_x.squaredNorm() + g.W_h.squaredNorm() + g.b.squaredNorm();
}

// Global-norm clipping; no-op when clip <= 0.
inline void clip_gradients(Gradients& g, double clip) {
  if (clip <= 0.0) return;
  const double norm = std::sqrt(grad_squared_norm(g));
  if (norm > clip) {
    const double s = clip / norm;
    g.W_x *= s;
    g.W_h *= s;
    g.b *= s;
  }
}

}  // namespace seqrecall
