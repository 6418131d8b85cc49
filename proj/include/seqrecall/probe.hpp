#pragma once

// Timestep-regression probe: collect per-timestep (h, c) states over test
// examples, regress the timestep on the state with ordinary least squares,
// rank neurons by single-feature R^2, and summarize counting-shaped traces.
// Probing is read-only; parameters are never modified.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqrecall/datagen.hpp"
#include "seqrecall/model.hpp"

namespace seqrecall {

enum class StateKind { kHidden, kCell };

inline const char* state_kind_name(StateKind k) {
  return k == StateKind::kHidden ? "h" : "c";
}

// One row per (example, timestep); t is the 1-based count of inputs seen.
struct StateTable {
  int n = 0;
  int d = 0;
  std::vector<int32_t> example_id;
  Vector t;
  Matrix h;  // rows x d
  Matrix c;  // rows x d

  int64_t rows() const { return static_cast<int64_t>(t.size()); }
};

inline StateTable collect_states(const LSTMParams& p, const std::vector<Example>& examples,
                                 int64_t limit) {
  if (examples.empty()) throw std::invalid_argument("collect_states: empty examples");
  const int64_t count = std::min<int64_t>(limit, static_cast<int64_t>(examples.size()));
  const int n = static_cast<int>(examples[0].tokens.size());
  StateTable table;
  table.n = n;
  table.d = p.d();
  const int64_t rows = count * n;
  table.example_id.resize(static_cast<size_t>(rows));
  table.t.resize(rows);
  table.h.resize(rows, p.d());
  table.c.resize(rows, p.d());
  for (int64_t e = 0; e < count; ++e) {
    const auto states = record_states(p, examples[static_cast<size_t>(e)].tokens);
    for (int t = 0; t < n; ++t) {
      const int64_t r = e * n + t;
      table.example_id[static_cast<size_t>(r)] = static_cast<int32_t>(e);
      table.t[r] = static_cast<double>(t + 1);
      table.h.row(r) = states[static_cast<size_t>(t)].h.transpose();
      table.c.row(r) = states[static_cast<size_t>(t)].c.transpose();
    }
  }
  return table;
}

struct OlsFit {
  Vector coef;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares via centered normal equations with tiny ridge damping (1e-8)
// for rank safety. R^2 = 1 - SS_res/SS_tot; constant targets give R^2 = 0.
inline OlsFit ols_fit(const Matrix& X, const Vector& y) {
  if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("ols_fit: empty design");
  if (X.rows() != y.size()) throw std::invalid_argument("ols_fit: row mismatch");
  if (X.rows() < X.cols() + 1)
    throw std::invalid_argument("ols_fit: need rows >= columns + 1");

  const Eigen::RowVectorXd xbar = X.colwise().mean();
  const double ybar = y.mean();
  Matrix Xc = X.rowwise() - xbar;
  Vector yc = y.array() - ybar;

  Eigen::MatrixXd normal = Xc.transpose() * Xc;
  normal.diagonal().array() += 1e-8;
  OlsFit fit;
  fit.coef = normal.ldlt().solve(Xc.transpose() * yc);
  fit.intercept = ybar - (xbar * fit.coef).value();

  const double ss_tot = yc.squaredNorm();
  if (ss_tot == 0.0) {
    fit.r2 = 0.0;
    return fit;
  }
  const double ss_res = (yc - Xc * fit.coef).squaredNorm();
  fit.r2 = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  return fit;
}

// R^2 of predicting the timestep from the full d-dimensional state.
inline double full_state_r2(const StateTable& table, StateKind which) {
  const Matrix& X = which == StateKind::kHidden ? table.h : table.c;
  return ols_fit(X, table.t).r2;
}

struct NeuronR2 {
  int neuron = 0;
  double r2_c = 0.0;
  double r2_h = 0.0;
};

// Single-feature fits per neuron for both state kinds, ranked descending by
// the cell-state R^2.
inline std::vector<NeuronR2> per_neuron_r2(const StateTable& table) {
  std::vector<NeuronR2> out(static_cast<size_t>(table.d));
  for (int j = 0; j < table.d; ++j) {
    out[static_cast<size_t>(j)].neuron = j;
    out[static_cast<size_t>(j)].r2_c = ols_fit(table.c.col(j), table.t).r2;
    out[static_cast<size_t>(j)].r2_h = ols_fit(table.h.col(j), table.t).r2;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const NeuronR2& a, const NeuronR2& b) { return a.r2_c > b.r2_c; });
  return out;
}

// Activation time series of one neuron over one example; index i holds t=i+1.
inline std::vector<double> trace_neuron(const LSTMParams& p, const Example& example, int neuron,
                                        StateKind which) {
  if (neuron < 0 || neuron >= p.d()) throw std::invalid_argument("trace_neuron: index out of range");
  const auto states = record_states(p, example.tokens);
  std::vector<double> trace(states.size());
  for (size_t t = 0; t < states.size(); ++t)
    trace[t] = which == StateKind::kHidden ? states[t].h[neuron] : states[t].c[neuron];
  return trace;
}

struct CountingStats {
  double pre_corr = 0.0;       // Pearson r of activation vs t over t <= target
  double post_mag_ratio = 0.0; // mean |activation| after target / |activation at target|
};

// `target` is the 1-based timestep of the label token.
inline CountingStats counting_shape_stats(const std::vector<double>& trace, int target) {
  const int n = static_cast<int>(trace.size());
  if (target < 1 || n <= target + 1)
    throw std::invalid_argument("counting_shape_stats: trace too short for target");

  CountingStats stats;
  // Pearson correlation over the pre-target segment.
  double mean_t = 0.0, mean_a = 0.0;
  for (int t = 1; t <= target; ++t) {
    mean_t += t;
    mean_a += trace[static_cast<size_t>(t - 1)];
  }
  mean_t /= target;
  mean_a /= target;
  double cov = 0.0, var_t = 0.0, var_a = 0.0;
  for (int t = 1; t <= target; ++t) {
    const double dt = t - mean_t;
    const double da = trace[static_cast<size_t>(t - 1)] - mean_a;
    cov += dt * da;
    var_t += dt * dt;
    var_a += da * da;
  }
  stats.pre_corr = (var_t == 0.0 || var_a == 0.0) ? 0.0 : cov / std::sqrt(var_t * var_a);

  double post_sum = 0.0;
  for (int t = target + 1; t <= n; ++t) post_sum += std::abs(trace[static_cast<size_t>(t - 1)]);
  const double at_target = std::abs(trace[static_cast<size_t>(target - 1)]);
  const double post_mean = post_sum / (n - target);
  stats.post_mag_ratio =
      at_target > 0.0 ? post_mean / at_target
                      : (post_mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return stats;
}

struct ProbeReport {
  double full_state_r2_c = 0.0;
  double full_state_r2_h = 0.0;
  std::vector<NeuronR2> per_neuron;  // descending by r2_c
  std::vector<std::string> traces;   // exported trace file names
};

inline ProbeReport make_probe_report(const StateTable& table) {
  ProbeReport report;
  report.full_state_r2_c = full_state_r2(table, StateKind::kCell);
  report.full_state_r2_h = full_state_r2(table, StateKind::kHidden);
  report.per_neuron = per_neuron_r2(table);
  return report;
}

inline nlohmann::json probe_report_json(const ProbeReport& report) {
  nlohmann::json j;
  j["full_state_r2"] = {{"c", report.full_state_r2_c}, {"h", report.full_state_r2_h}};
  nlohmann::json neurons = nlohmann::json::array();
  for (const auto& nr : report.per_neuron)
    neurons.push_back({{"index", nr.neuron}, {"r2_c", nr.r2_c}, {"r2_h", nr.r2_h}});
  j["neurons"] = neurons;
  j["traces"] = report.traces;
  return j;
}

inline void write_trace_csv(const std::vector<double>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write file: " + path);
  out << "t,activation\n";
  char buf[64];
  for (size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i + 1, trace[i]);
    out << buf;
  }
}

}  // namespace seqrecall
