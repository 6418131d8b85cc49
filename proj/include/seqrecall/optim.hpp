#pragma once

// Adam with bias correction, plus the plateau schedule: halve the learning
// rate after three consecutive epochs without strict validation-loss
// improvement. The counter resets after a halving, so a fresh window must
// elapse before the next one.

#include <limits>

#include "seqrecall/model.hpp"
#include "seqrecall/numkit.hpp"

namespace seqrecall {

struct AdamState {
  Matrix m_Wx, v_Wx;
  Matrix m_Wh, v_Wh;
  Vector m_b, v_b;
  int64_t step_count = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(const LSTMParams& p, double lr) {
  AdamState s;
  s.lr = lr;
  s.m_Wx = Matrix::Zero(p.W_x.rows(), p.W_x.cols());
  s.v_Wx = Matrix::Zero(p.W_x.rows(), p.W_x.cols());
  s.m_Wh = Matrix::Zero(p.W_h.rows(), p.W_h.cols());
  s.v_Wh = Matrix::Zero(p.W_h.rows(), p.W_h.cols());
  s.m_b = Vector::Zero(p.b.size());
  s.v_b = Vector::Zero(p.b.size());
  return s;
}

namespace detail {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, const AdamState& s, double corr1,
                 double corr2) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v.array() = s.beta2 * v.array() + (1.0 - s.beta2) * grad.array().square();
  param.array() -= s.lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + s.eps);
}

}  // namespace detail

// Standard Adam over the trainable set {W_x, W_h, b}. E never appears here;
// the embedding stays frozen by construction.
inline void adam_step(LSTMParams& p, const Gradients& g, AdamState& s) {
  if (g.W_x.rows() != p.W_x.rows() || g.W_x.cols() != p.W_x.cols() ||
      g.W_h.rows() != p.W_h.rows() || g.W_h.cols() != p.W_h.cols() || g.b.size() != p.b.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  s.step_count += 1;
  const double corr1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double corr2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  detail::adam_update(p.W_x, g.W_x, s.m_Wx, s.v_Wx, s, corr1, corr2);
  detail::adam_update(p.W_h, g.W_h, s.m_Wh, s.v_Wh, s, corr1, corr2);
  detail::adam_update(p.b, g.b, s.m_b, s.v_b, s, corr1, corr2);
}

struct PlateauState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  int halvings = 0;
  int patience = 3;
};

// Called once per epoch with that epoch's validation loss. Strict improvement
// resets the window; otherwise the counter grows and on hitting `patience`
// the rate is halved and the counter resets.
inline double plateau_update(PlateauState& st, double val_loss, double lr) {
  if (val_loss < st.best_val_loss) {
    st.best_val_loss = val_loss;
    st.epochs_since_improvement = 0;
    return lr;
  }
  st.epochs_since_improvement += 1;
  if (st.epochs_since_improvement >= st.patience) {
    st.epochs_since_improvement = 0;
    st.halvings += 1;
    return lr * 0.5;
  }
  return lr;
}

}  // namespace seqrecall
