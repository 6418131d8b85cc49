#pragma once

// The training protocol: seeded epoch shuffles, batched BPTT + Adam, plateau
// halving on validation loss, early stop at perfect validation accuracy, a
// hard epoch cap, and best-of-n-seeds selection on final validation accuracy.
//
// Training decisions never touch the test set. Per-epoch test accuracy (for
// convergence curves) comes from an optional observer that only ever sees a
// parameter snapshot.

#include <atomic>
#include <cstdio>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "seqrecall/datagen.hpp"
#include "seqrecall/model.hpp"
#include "seqrecall/optim.hpp"

namespace seqrecall {

struct TrainConfig {
  int max_epochs = 240;
  int batch_size = 64;
  double initial_lr = 0.001;
  int n_seeds = 3;
  double validation_frac = 0.05;
  bool shuffle_each_epoch = true;
  double clip = 0.0;  // global-norm clip; 0 disables
  int plateau_patience = 3;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;  // rate in effect during the epoch
};

enum class StopReason { kPerfectValidation, kEpochCap };

inline const char* stop_reason_name(StopReason r) {
  return r == StopReason::kPerfectValidation ? "perfect_validation" : "epoch_cap";
}

struct RunRecord {
  uint64_t run_seed = 0;
  int seed_index = 0;
  LSTMParams params;
  AdamState adam;
  PlateauState plateau;
  int epochs_done = 0;
  std::optional<StopReason> stop_reason;
  std::vector<EpochMetrics> metrics;

  double final_val_acc() const { return metrics.empty() ? 0.0 : metrics.back().val_acc; }
  double final_val_loss() const {
    return metrics.empty() ? std::numeric_limits<double>::infinity() : metrics.back().val_loss;
  }
};

// Accuracy snapshot over a parameter checkpoint; used for per-epoch test
// curves without giving the trainer a handle on the test data.
using TestObserver = std::function<double(const LSTMParams&)>;

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

namespace detail {

inline int dataset_length(const std::vector<Example>& examples, const char* what) {
  if (examples.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
  const int n = static_cast<int>(examples[0].tokens.size());
  for (const auto& ex : examples)
    if (static_cast<int>(ex.tokens.size()) != n)
      throw std::invalid_argument(std::string(what) + ": mixed sequence lengths");
  return n;
}

inline void fill_batch(const std::vector<Example>& examples, const int32_t* order, int64_t begin,
                       int B, int n, std::vector<int32_t>& tokens, std::vector<int32_t>& labels) {
  tokens.resize(static_cast<size_t>(B) * n);
  labels.resize(B);
  for (int e = 0; e < B; ++e) {
    const Example& ex = examples[order ? order[begin + e] : begin + e];
    std::copy(ex.tokens.begin(), ex.tokens.end(), tokens.begin() + static_cast<size_t>(e) * n);
    labels[e] = ex.label;
  }
}

}  // namespace detail

// Mean fused cross-entropy and argmax accuracy, batched forward only.
inline EvalResult evaluate_loss(const LSTMParams& p, const std::vector<Example>& examples) {
  const int n = detail::dataset_length(examples, "evaluate");
  const int64_t N = static_cast<int64_t>(examples.size());
  constexpr int kEvalBatch = 512;
  std::vector<int32_t> tokens, labels;
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t begin = 0; begin < N; begin += kEvalBatch) {
    const int B = static_cast<int>(std::min<int64_t>(kEvalBatch, N - begin));
    detail::fill_batch(examples, nullptr, begin, B, n, tokens, labels);
    const Matrix logits = forward_logits_batch(p, tokens, B, n);
    for (int e = 0; e < B; ++e) {
      const double* row = logits.data() + static_cast<size_t>(e) * p.V();
      loss_sum += log_sum_exp(row, p.V()) - row[labels[e]];
      if (argmax_lowest(row, p.V()) == labels[e]) ++correct;
    }
  }
  EvalResult r;
  r.loss = loss_sum / static_cast<double>(N);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(N);
  if (!std::isfinite(r.loss)) throw NumericError("evaluate: non-finite loss");
  return r;
}

// Fraction of examples whose predicted id equals the label.
inline double evaluate(const LSTMParams& p, const std::vector<Example>& examples) {
  const int n = detail::dataset_length(examples, "evaluate");
  const int64_t N = static_cast<int64_t>(examples.size());
  constexpr int kEvalBatch = 512;
  std::vector<int32_t> tokens, labels;
  int64_t correct = 0;
  for (int64_t begin = 0; begin < N; begin += kEvalBatch) {
    const int B = static_cast<int>(std::min<int64_t>(kEvalBatch, N - begin));
    detail::fill_batch(examples, nullptr, begin, B, n, tokens, labels);
    const Matrix logits = forward_logits_batch(p, tokens, B, n);
    for (int e = 0; e < B; ++e)
      if (argmax_lowest(logits.data() + static_cast<size_t>(e) * p.V(), p.V()) == labels[e])
        ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(N);
}

// One training run. Construct fresh or from a resumed RunRecord snapshot;
// run_epoch advances one epoch at a time so callers can checkpoint between
// epochs. Deterministic per (config, model seed, run seed): epoch shuffles
// come from counter-derived streams, so resuming never replays RNG state.
class TrainerSession {
 public:
  TrainerSession(const TrainConfig& config, const ModelConfig& model_config,
                 const std::vector<Example>& train, const std::vector<Example>& val,
                 uint64_t run_seed, int seed_index = 0)
      : config_(config), train_(train), val_(val) {
    validate_datasets(model_config.V);
    state_.run_seed = run_seed;
    state_.seed_index = seed_index;
    ModelConfig mc = model_config;
    mc.seed = RandomStream(run_seed, "model-seed").derive("init").next_u64();
    state_.params = init_model(mc);
    state_.adam = make_adam(state_.params, config.initial_lr);
    state_.plateau.patience = config.plateau_patience;
  }

  TrainerSession(const TrainConfig& config, RunRecord resumed, const std::vector<Example>& train,
                 const std::vector<Example>& val)
      : config_(config), train_(train), val_(val), state_(std::move(resumed)) {
    validate_datasets(state_.params.V());
  }

  bool done() const { return state_.stop_reason.has_value(); }
  const RunRecord& record() const { return state_; }
  RunRecord take() && { return std::move(state_); }

  void run_epoch(const TestObserver& test_observer = nullptr) {
    if (done()) return;
    const int n = static_cast<int>(train_[0].tokens.size());
    const int64_t N = static_cast<int64_t>(train_.size());
    const int epoch = state_.epochs_done + 1;
    const double lr_in_effect = state_.adam.lr;

    std::vector<int32_t> order(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) order[static_cast<size_t>(i)] = static_cast<int32_t>(i);
    if (config_.shuffle_each_epoch) {
      RandomStream rng = RandomStream(state_.run_seed, "epoch-shuffle")
                             .derive("epoch", static_cast<uint64_t>(epoch));
      detail::fisher_yates(order, rng);
    }

    std::vector<int32_t> tokens, labels;
    Gradients grads;
    double loss_sum = 0.0;
    for (int64_t begin = 0; begin < N; begin += config_.batch_size) {
      const int B = static_cast<int>(std::min<int64_t>(config_.batch_size, N - begin));
      detail::fill_batch(train_, order.data(), begin, B, n, tokens, labels);
      const ForwardCache cache = forward_batch(state_.params, tokens, B, n);
      const double loss = backward_batch(state_.params, cache, labels, grads);
      loss_sum += loss * B;
      clip_gradients(grads, config_.clip);
      adam_step(state_.params, grads, state_.adam);
    }

    const EvalResult val = evaluate_loss(state_.params, val_);

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(N);
    m.val_loss = val.loss;
    m.val_acc = val.accuracy;
    m.lr = lr_in_effect;
    if (test_observer) m.test_acc = test_observer(state_.params);
    if (!std::isfinite(m.train_loss)) throw NumericError("train: non-finite training loss");

    state_.adam.lr = plateau_update(state_.plateau, val.loss, state_.adam.lr);
    state_.metrics.push_back(m);
    state_.epochs_done = epoch;

    if (val.accuracy == 1.0) state_.stop_reason = StopReason::kPerfectValidation;
    else if (epoch >= config_.max_epochs) state_.stop_reason = StopReason::kEpochCap;
  }

 private:
  void validate_datasets(int32_t V) const {
    const int n_train = detail::dataset_length(train_, "train");
    const int n_val = detail::dataset_length(val_, "validation");
    if (n_train != n_val)
      throw std::invalid_argument("train: train/validation sequence length mismatch");
    for (const auto* set : {&train_, &val_})
      for (const auto& ex : *set) {
        if (ex.label < 0 || ex.label >= V)
          throw std::invalid_argument("train: label outside vocabulary");
        for (int32_t t : ex.tokens)
          if (t < 0 || t >= V) throw std::invalid_argument("train: token outside vocabulary");
      }
  }

  TrainConfig config_;
  const std::vector<Example>& train_;
  const std::vector<Example>& val_;
  RunRecord state_;
};

inline RunRecord train_run(const TrainConfig& config, const ModelConfig& model_config,
                           const std::vector<Example>& train, const std::vector<Example>& val,
                           uint64_t run_seed, int seed_index = 0,
                           const TestObserver& test_observer = nullptr) {
  TrainerSession session(config, model_config, train, val, run_seed, seed_index);
  while (!session.done()) session.run_epoch(test_observer);
  return std::move(session).take();
}

struct MultiSeedResult {
  std::vector<RunRecord> runs;
  int selected = 0;

  const RunRecord& best() const { return runs[static_cast<size_t>(selected)]; }
};

inline int select_best_run(const std::vector<RunRecord>& runs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(runs.size()); ++i) {
    const RunRecord& a = runs[static_cast<size_t>(i)];
    const RunRecord& b = runs[static_cast<size_t>(best)];
    if (a.final_val_acc() > b.final_val_acc() ||
        (a.final_val_acc() == b.final_val_acc() && a.final_val_loss() < b.final_val_loss()))
      best = i;
    // remaining ties keep the lower seed index (first seen)
  }
  return best;
}

// Runs config.n_seeds independent seeds and selects the run with the highest
// final validation accuracy (ties: lower validation loss, then lower seed).
// Seeds are fully independent, so they may run on a small worker pool.
inline MultiSeedResult multi_seed_select(const TrainConfig& config,
                                         const ModelConfig& model_config,
                                         const std::vector<Example>& train,
                                         const std::vector<Example>& val, uint64_t base_seed,
                                         const TestObserver& test_observer = nullptr,
                                         int jobs = 1) {
  if (config.n_seeds < 1) throw std::invalid_argument("multi_seed_select: n_seeds must be >= 1");
  MultiSeedResult result;
  result.runs.resize(static_cast<size_t>(config.n_seeds));
  auto seed_of = [&](int k) {
    return RandomStream(base_seed, "run-seeds").derive("seed", static_cast<uint64_t>(k)).next_u64();
  };

  if (jobs <= 1 || config.n_seeds == 1) {
    for (int k = 0; k < config.n_seeds; ++k)
      result.runs[static_cast<size_t>(k)] =
          train_run(config, model_config, train, val, seed_of(k), k, test_observer);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
      for (;;) {
        const int k = next.fetch_add(1);
        if (k >= config.n_seeds) return;
        try {
          result.runs[static_cast<size_t>(k)] =
              train_run(config, model_config, train, val, seed_of(k), k, test_observer);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int n_workers = std::min(jobs, config.n_seeds);
    pool.reserve(static_cast<size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  result.selected = select_best_run(result.runs);
  return result;
}

// ---- metrics / summary CSV formats ----

inline void write_metrics_csv(const RunRecord& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write file: " + path);
  out << "epoch,train_loss,val_loss,val_acc,test_acc,lr\n";
  char buf[256];
  for (const auto& m : run.metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", m.epoch, m.train_loss,
                  m.val_loss, m.val_acc, m.test_acc, m.lr);
    out << buf;
  }
}

struct SweepRow {
  std::string regimen;
  int n = 0;
  int hidden = 0;
  int seed_selected = 0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  int epochs = 0;
  std::string stop_reason;
};

inline constexpr const char* kSweepHeader =
    "regimen,n,hidden,seed_selected,val_acc,test_acc,epochs,stop_reason";

inline std::string sweep_row_csv(const SweepRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%.9g,%.9g,%d,%s", r.regimen.c_str(), r.n, r.hidden,
                r.seed_selected, r.val_acc, r.test_acc, r.epochs, r.stop_reason.c_str());
  return buf;
}

}  // namespace seqrecall
