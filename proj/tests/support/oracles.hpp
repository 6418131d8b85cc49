#pragma once

// Independent oracles used only by tests. These deliberately avoid the
// library's implementation paths: plain loops, Householder QR instead of
// normal equations, scalar recurrences instead of batched matrix code.

#include <cmath>
#include <cstdint>
#include <vector>

#include "seqrecall/model.hpp"
#include "seqrecall/numkit.hpp"

namespace oracles {

// Upper-tail p-value of a chi-square statistic via the Wilson-Hilferty cube
// root approximation; accurate enough for coarse hypothesis gates.
inline double chi_square_pvalue(double stat, double dof) {
  const double t = std::cbrt(stat / dof);
  const double mu = 1.0 - 2.0 / (9.0 * dof);
  const double sigma = std::sqrt(2.0 / (9.0 * dof));
  const double z = (t - mu) / sigma;
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

// Chi-square goodness-of-fit p-value for observed counts against expected.
inline double chi_square_gof_pvalue(const std::vector<int64_t>& observed,
                                    const std::vector<double>& expected) {
  double stat = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    const double diff = static_cast<double>(observed[i]) - expected[i];
    stat += diff * diff / expected[i];
  }
  return chi_square_pvalue(stat, static_cast<double>(observed.size() - 1));
}

// Ordinary one-dimensional least squares: returns (slope, intercept).
inline std::pair<double, double> ols_line(const std::vector<double>& x,
                                          const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

// Least squares through Householder QR on the intercept-augmented design.
// Returns fitted coefficients (intercept first) and R^2.
struct QrFit {
  std::vector<double> beta;  // [intercept, coef...]
  double r2 = 0.0;
};

inline QrFit qr_least_squares(const seqrecall::Matrix& X, const seqrecall::Vector& y) {
  const Eigen::Index m = X.rows();
  const Eigen::Index p = X.cols() + 1;
  Eigen::MatrixXd A(m, p);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  Eigen::VectorXd r = y;

  Eigen::MatrixXd R = A;
  // Householder triangularization applied to [R | r].
  for (Eigen::Index k = 0; k < p; ++k) {
    Eigen::VectorXd v = R.col(k).tail(m - k);
    const double alpha = -std::copysign(v.norm(), v[0]);
    v[0] -= alpha;
    const double vnorm2 = v.squaredNorm();
    if (vnorm2 == 0.0) continue;
    for (Eigen::Index j = k; j < p; ++j) {
      const double proj = v.dot(R.col(j).tail(m - k));
      R.col(j).tail(m - k) -= (2.0 * proj / vnorm2) * v;
    }
    const double proj = v.dot(r.tail(m - k));
    r.tail(m - k) -= (2.0 * proj / vnorm2) * v;
  }

  QrFit fit;
  fit.beta.assign(static_cast<size_t>(p), 0.0);
  for (Eigen::Index k = p - 1; k >= 0; --k) {
    double acc = r[k];
    for (Eigen::Index j = k + 1; j < p; ++j) acc -= R(k, j) * fit.beta[static_cast<size_t>(j)];
    fit.beta[static_cast<size_t>(k)] = acc / R(k, k);
  }

  // R^2 from the residuals of the fitted model.
  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = y.mean();
  for (Eigen::Index i = 0; i < m; ++i) {
    double pred = fit.beta[0];
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      pred += fit.beta[static_cast<size_t>(j + 1)] * X(i, j);
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r2 = ss_tot == 0.0 ? 0.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

// Scalar-loop LSTM step reference, gate order (i, f, g, o).
inline seqrecall::LSTMState scalar_lstm_step(const seqrecall::LSTMParams& p,
                                             const seqrecall::LSTMState& s,
                                             const seqrecall::Vector& x) {
  const int d = p.d();
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  seqrecall::LSTMState out;
  out.h.resize(d);
  out.c.resize(d);
  for (int j = 0; j < d; ++j) {
    double ai = p.b[j], af = p.b[d + j], ag = p.b[2 * d + j], ao = p.b[3 * d + j];
    for (int k = 0; k < d; ++k) {
      ai += p.W_x(j, k) * x[k] + p.W_h(j, k) * s.h[k];
      af += p.W_x(d + j, k) * x[k] + p.W_h(d + j, k) * s.h[k];
      ag += p.W_x(2 * d + j, k) * x[k] + p.W_h(2 * d + j, k) * s.h[k];
      ao += p.W_x(3 * d + j, k) * x[k] + p.W_h(3 * d + j, k) * s.h[k];
    }
    const double c = sigmoid(af) * s.c[j] + sigmoid(ai) * std::tanh(ag);
    out.c[j] = c;
    out.h[j] = sigmoid(ao) * std::tanh(c);
  }
  return out;
}

// Loss of one example as a scalar function of the parameters; drives the
// central finite-difference gradient check.
inline double example_loss(const seqrecall::LSTMParams& p, const std::vector<int32_t>& tokens,
                           int32_t label) {
  const seqrecall::ForwardCache cache = seqrecall::forward(p, tokens);
  seqrecall::Vector logits = cache.logits.row(0).transpose();
  return seqrecall::cross_entropy(logits, label);
}

struct FdCheckResult {
  double max_rel_err = 0.0;
};

// Central finite differences over every trainable parameter.
inline FdCheckResult fd_gradient_check(seqrecall::LSTMParams p, const std::vector<int32_t>& tokens,
                                       int32_t label, double eps = 1e-5) {
  seqrecall::Gradients grads;
  {
    const seqrecall::ForwardCache cache = seqrecall::forward(p, tokens);
    seqrecall::backward(p, cache, label, grads);
  }
  FdCheckResult result;
  auto check_tensor = [&](double* data, Eigen::Index size, const double* analytic) {
    for (Eigen::Index i = 0; i < size; ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = example_loss(p, tokens, label);
      data[i] = saved - eps;
      const double down = example_loss(p, tokens, label);
      data[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double denom = std::max({1e-6, std::abs(fd), std::abs(analytic[i])});
      result.max_rel_err = std::max(result.max_rel_err, std::abs(fd - analytic[i]) / denom);
    }
  };
  check_tensor(p.W_x.data(), p.W_x.size(), grads.W_x.data());
  check_tensor(p.W_h.data(), p.W_h.size(), grads.W_h.data());
  check_tensor(p.b.data(), p.b.size(), grads.b.data());
  return result;
}

}  // namespace oracles
