#pragma once

// Experiment configuration and the command layer behind the CLI: dataset
// generation with integrity manifests, cell training with multi-seed
// selection and checkpoints, evaluation, probing, and figure-data export.
//
// Every artifact is reproducible from (config, global seed): all stream seeds
// are derived from the global seed and purpose labels, and manifests record
// content hashes so mismatched inputs are refused instead of silently used.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqrecall/checkpoint.hpp"
#include "seqrecall/corpus.hpp"
#include "seqrecall/datagen.hpp"
#include "seqrecall/probe.hpp"
#include "seqrecall/trainer.hpp"

namespace seqrecall {

namespace fs = std::filesystem;

struct SynthSpec {
  int64_t n_tokens = 1'200'000;
  int32_t vocab_size = 10000;
  double zipf_s = 1.0;
  int markov_order = 2;
  double stickiness = 0.8;
  int successors = 3;
};

struct CorpusSpec {
  std::string path;  // empty -> synthesize
  bool add_eos = true;
  int32_t max_types = 10000;
  SynthSpec synth;

  bool is_synth() const { return path.empty(); }
};

struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out = "out";
  CorpusSpec corpus;
  std::vector<std::string> regimens = {"uniform", "unigram", "language"};
  std::vector<int> lengths = {10, 40};
  std::vector<int> hidden_sizes = {50};
  int64_t examples_per_cell = 0;  // 0 -> floor(T/n)
  int64_t rare_test_examples = 10000;
  int32_t rare_set_size = 100;
  int checkpoint_every = 0;  // epochs between partial checkpoints; 0 = final only
  int probe_examples = 100;
  TrainConfig train;
};

// ---- config (de)serialization; a full dump round-trips losslessly ----

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"max_epochs", c.max_epochs},
       {"batch_size", c.batch_size},
       {"initial_lr", c.initial_lr},
       {"n_seeds", c.n_seeds},
       {"validation_frac", c.validation_frac},
       {"shuffle_each_epoch", c.shuffle_each_epoch},
       {"clip", c.clip},
       {"plateau_patience", c.plateau_patience}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.n_seeds = j.value("n_seeds", c.n_seeds);
  c.validation_frac = j.value("validation_frac", c.validation_frac);
  c.shuffle_each_epoch = j.value("shuffle_each_epoch", c.shuffle_each_epoch);
  c.clip = j.value("clip", c.clip);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
}

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"n_tokens", s.n_tokens}, {"vocab_size", s.vocab_size},   {"zipf_s", s.zipf_s},
       {"markov_order", s.markov_order}, {"stickiness", s.stickiness}, {"successors", s.successors}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  s.n_tokens = j.value("n_tokens", s.n_tokens);
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  s.zipf_s = j.value("zipf_s", s.zipf_s);
  s.markov_order = j.value("markov_order", s.markov_order);
  s.stickiness = j.value("stickiness", s.stickiness);
  s.successors = j.value("successors", s.successors);
}

inline void to_json(nlohmann::json& j, const CorpusSpec& c) {
  j = nlohmann::json::object();
  if (!c.path.empty()) {
    j["path"] = c.path;
    j["eos"] = c.add_eos;
    j["max_types"] = c.max_types;
  } else {
    j["synth"] = c.synth;
  }
}

inline void from_json(const nlohmann::json& j, CorpusSpec& c) {
  c.path = j.value("path", std::string{});
  c.add_eos = j.value("eos", c.add_eos);
  c.max_types = j.value("max_types", c.max_types);
  if (j.contains("synth")) c.synth = j.at("synth").get<SynthSpec>();
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"seed", c.seed},
       {"out", c.out},
       {"corpus", c.corpus},
       {"regimens", c.regimens},
       {"lengths", c.lengths},
       {"hidden_sizes", c.hidden_sizes},
       {"examples_per_cell", c.examples_per_cell},
       {"rare_test_examples", c.rare_test_examples},
       {"rare_set_size", c.rare_set_size},
       {"checkpoint_every", c.checkpoint_every},
       {"probe_examples", c.probe_examples},
       {"train", c.train}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
  if (j.contains("corpus")) c.corpus = j.at("corpus").get<CorpusSpec>();
  c.regimens = j.value("regimens", c.regimens);
  c.lengths = j.value("lengths", c.lengths);
  c.hidden_sizes = j.value("hidden_sizes", c.hidden_sizes);
  c.examples_per_cell = j.value("examples_per_cell", c.examples_per_cell);
  c.rare_test_examples = j.value("rare_test_examples", c.rare_test_examples);
  c.rare_set_size = j.value("rare_set_size", c.rare_set_size);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.probe_examples = j.value("probe_examples", c.probe_examples);
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
}

inline void validate_config(const ExperimentConfig& c) {
  if (!c.corpus.is_synth() && !fs::exists(c.corpus.path))
    throw IntegrityError("corpus file does not exist: " + c.corpus.path);
  for (const auto& r : c.regimens) parse_regimen(r);  // throws on unknown names
  for (int n : c.lengths)
    if (n < 2) throw std::invalid_argument("config: sequence lengths must be >= 2");
  for (int d : c.hidden_sizes)
    if (d < 1) throw std::invalid_argument("config: hidden sizes must be >= 1");
  if (c.train.n_seeds < 1) throw std::invalid_argument("config: n_seeds must be >= 1");
  if (!(c.train.validation_frac > 0.0 && c.train.validation_frac < 1.0))
    throw std::invalid_argument("config: validation_frac must be in (0, 1)");
}

inline ExperimentConfig load_config(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  ExperimentConfig c = j.get<ExperimentConfig>();
  validate_config(c);
  return c;
}

// ---- output layout ----

struct OutPaths {
  fs::path root;

  explicit OutPaths(const std::string& out) : root(out) {}

  fs::path data_dir() const { return root / "data"; }
  fs::path runs_dir() const { return root / "runs"; }
  fs::path probe_dir() const { return root / "probe"; }
  fs::path report_dir() const { return root / "report"; }
  fs::path vocab_tsv() const { return root / "vocab.tsv"; }
  fs::path corpus_meta() const { return root / "corpus.json"; }
  fs::path sweep_summary() const { return root / "sweep_summary.csv"; }

  static std::string dataset_name(const std::string& regimen, int n) {
    return regimen + "_n" + std::to_string(n);
  }
  static std::string cell_name(const std::string& regimen, int n, int d) {
    return dataset_name(regimen, n) + "_d" + std::to_string(d);
  }
  fs::path dataset(const std::string& name) const { return data_dir() / (name + ".jsonl"); }
  fs::path manifest(const std::string& name) const {
    return data_dir() / (name + ".manifest.json");
  }
  fs::path cell_dir(const std::string& cell) const { return runs_dir() / cell; }
};

inline uint64_t derived_seed(uint64_t base, std::string_view purpose, std::string_view name,
                             uint64_t index = 0) {
  return RandomStream(base, purpose).derive(name, index).next_u64();
}

inline uint64_t run_seed_for(uint64_t base_seed, int seed_index) {
  return RandomStream(base_seed, "run-seeds")
      .derive("seed", static_cast<uint64_t>(seed_index))
      .next_u64();
}

// ---- corpus acquisition ----

struct CorpusBundle {
  Vocabulary vocab;
  TokenStream stream;
};

inline std::string synth_token_name(int32_t id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%05d", id);
  return buf;
}

inline CorpusBundle acquire_corpus(const ExperimentConfig& cfg) {
  CorpusBundle bundle;
  std::vector<std::string> tokens;
  std::string source;
  int32_t max_types;
  if (cfg.corpus.is_synth()) {
    const SynthSpec& s = cfg.corpus.synth;
    SynthOptions opts;
    opts.successors = s.successors;
    opts.stickiness = s.stickiness;
    const TokenStream raw = synth_corpus(RandomStream(cfg.seed, "synth-corpus"), s.n_tokens,
                                         s.vocab_size, s.zipf_s, s.markov_order, opts);
    tokens.reserve(raw.ids.size());
    for (int32_t id : raw.ids) tokens.push_back(synth_token_name(id));
    source = raw.source;
    max_types = s.vocab_size;
  } else {
    TokenizeOptions topts;
    topts.add_eos = cfg.corpus.add_eos;
    tokens = tokenize(read_text_file(cfg.corpus.path), topts);
    source = cfg.corpus.path;
    max_types = cfg.corpus.max_types;
  }
  bundle.vocab = build_vocab(tokens, max_types);
  bundle.stream = encode(tokens, bundle.vocab, source, bundle.vocab.has_unknown());
  return bundle;
}

// ---- gen-data ----

inline void cmd_gen_data(const ExperimentConfig& cfg) {
  OutPaths paths(cfg.out);
  fs::create_directories(paths.data_dir());

  CorpusBundle bundle = acquire_corpus(cfg);
  if (cfg.corpus.is_synth() && bundle.vocab.size() != cfg.corpus.synth.vocab_size)
    throw IntegrityError(
        "synthetic corpus did not cover the full vocabulary (" +
        std::to_string(bundle.vocab.size()) + " of " +
        std::to_string(cfg.corpus.synth.vocab_size) + " types); raise synth.n_tokens");

  save_vocab(bundle.vocab, paths.vocab_tsv().string());
  const std::string vocab_hash = file_hash_hex(paths.vocab_tsv().string());

  {
    nlohmann::json meta;
    meta["source"] = bundle.stream.source;
    meta["tokens"] = bundle.stream.ids.size();
    meta["V"] = bundle.vocab.size();
    meta["vocab_hash"] = vocab_hash;
    save_manifest(meta, paths.corpus_meta().string());
  }

  const int64_t T = static_cast<int64_t>(bundle.stream.ids.size());
  for (int n : cfg.lengths) {
    const int64_t available = T / n;
    const int64_t target =
        cfg.examples_per_cell > 0 ? std::min(cfg.examples_per_cell, available) : available;

    for (const auto& regimen : cfg.regimens) {
      int k = 0;
      const Regimen r = parse_regimen(regimen, &k);
      const std::string name = OutPaths::dataset_name(regimen, n);
      const uint64_t seed = derived_seed(cfg.seed, "datagen", name);
      std::vector<Example> examples;
      switch (r) {
        case Regimen::kUniform:
          examples = gen_uniform(bundle.vocab.size(), n, target, seed);
          break;
        case Regimen::kUnigram:
          examples = gen_unigram(bundle.stream, n, seed);
          break;
        case Regimen::kKgram:
          examples = gen_kgram(bundle.stream, k, n, seed);
          break;
        case Regimen::kLanguage:
          examples = gen_language(bundle.stream, n);
          break;
        case Regimen::kRareTest:
          throw std::invalid_argument("rare is generated implicitly, not as a training regimen");
      }
      if (static_cast<int64_t>(examples.size()) > target) examples.resize(target);

      DatasetSpec spec;
      spec.regimen = r;
      spec.k = k;
      spec.n = n;
      spec.count = static_cast<int64_t>(examples.size());
      spec.seed = seed;
      spec.source = bundle.stream.source;
      save_examples_jsonl(examples, paths.dataset(name).string());
      save_manifest(manifest_json(spec, name + ".jsonl", vocab_hash),
                    paths.manifest(name).string());
    }

    {
      const std::string name = OutPaths::dataset_name("rare", n);
      const uint64_t seed = derived_seed(cfg.seed, "datagen", name);
      std::vector<Example> examples =
          gen_rare_test(bundle.vocab, n, cfg.rare_test_examples, seed, cfg.rare_set_size);
      DatasetSpec spec;
      spec.regimen = Regimen::kRareTest;
      spec.n = n;
      spec.count = static_cast<int64_t>(examples.size());
      spec.seed = seed;
      spec.source = bundle.stream.source;
      save_examples_jsonl(examples, paths.dataset(name).string());
      save_manifest(manifest_json(spec, name + ".jsonl", vocab_hash),
                    paths.manifest(name).string());
    }
  }
}

// ---- train ----

struct CellRef {
  std::string regimen;
  int k = 0;
  int n = 0;
  int d = 0;
};

// Parses "regimen:n:d", e.g. "language:40:50".
inline CellRef parse_cell(const std::string& text) {
  const size_t a = text.find(':');
  const size_t b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (a == std::string::npos || b == std::string::npos)
    throw std::invalid_argument("cell must look like regimen:n:d, got '" + text + "'");
  CellRef cell;
  cell.regimen = text.substr(0, a);
  parse_regimen(cell.regimen, &cell.k);
  cell.n = std::stoi(text.substr(a + 1, b - a - 1));
  cell.d = std::stoi(text.substr(b + 1));
  if (cell.n < 2 || cell.d < 1) throw std::invalid_argument("cell n/d out of range: " + text);
  return cell;
}

namespace detail {

inline void check_vocab_hash(const nlohmann::json& manifest, const std::string& vocab_hash,
                             const std::string& what) {
  const std::string expected = manifest.value("vocab_hash", "");
  if (expected != vocab_hash)
    throw IntegrityError("vocabulary hash mismatch for " + what + ": dataset was built against " +
                         expected + ", current vocab.tsv is " + vocab_hash);
}

inline std::vector<Example> load_dataset_checked(const OutPaths& paths, const std::string& name,
                                                 const std::string& vocab_hash) {
  const fs::path file = paths.dataset(name);
  if (!fs::exists(file))
    throw IntegrityError("missing dataset file: " + file.string() + " (run gen-data first)");
  check_vocab_hash(load_manifest(paths.manifest(name).string()), vocab_hash, name);
  return load_examples_jsonl(file.string());
}

}  // namespace detail

struct CellOutcome {
  SweepRow row;
  fs::path selected_ckpt;
};

// Trains one (regimen, n, d) cell: n_seeds independent runs with per-epoch
// rare-test tracking, best-validation selection, metrics CSVs, and the
// selected checkpoint. With resume=true, partial checkpoints (written every
// checkpoint_every epochs) are picked up and continued bit-exactly.
inline CellOutcome cmd_train_cell(const ExperimentConfig& cfg, const CellRef& cell, int jobs = 1,
                                  bool resume = false) {
  OutPaths paths(cfg.out);
  const std::string cell_name = OutPaths::cell_name(cell.regimen, cell.n, cell.d);
  const std::string train_name = OutPaths::dataset_name(cell.regimen, cell.n);
  const std::string rare_name = OutPaths::dataset_name("rare", cell.n);

  if (!fs::exists(paths.vocab_tsv()))
    throw IntegrityError("missing vocabulary file: " + paths.vocab_tsv().string());
  const std::string vocab_hash = file_hash_hex(paths.vocab_tsv().string());
  const Vocabulary vocab = load_vocab(paths.vocab_tsv().string());

  const std::vector<Example> all_train = detail::load_dataset_checked(paths, train_name, vocab_hash);
  const std::vector<Example> rare_test = detail::load_dataset_checked(paths, rare_name, vocab_hash);

  const uint64_t split_seed = derived_seed(cfg.seed, "val-split", train_name);
  auto [train_set, val_set] = split_validation(all_train, cfg.train.validation_frac, split_seed);

  ModelConfig mc;
  mc.V = vocab.size();
  mc.d = cell.d;

  const fs::path cell_dir = paths.cell_dir(cell_name);
  fs::create_directories(cell_dir);

  const uint64_t base_seed = derived_seed(cfg.seed, "train-cell", cell_name);
  TestObserver observer = [&rare_test](const LSTMParams& p) { return evaluate(p, rare_test); };

  std::vector<RunRecord> runs(static_cast<size_t>(cfg.train.n_seeds));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run_one = [&](int k) {
    const fs::path partial = cell_dir / ("seed" + std::to_string(k) + ".partial.ckpt");
    std::optional<TrainerSession> session;
    if (resume && fs::exists(partial)) {
      Checkpoint ck = load_checkpoint(partial.string());
      if (ck.vocab_hash != vocab_hash)
        throw IntegrityError("partial checkpoint was trained against a different vocabulary: " +
                             partial.string());
      session.emplace(cfg.train, std::move(ck.run), train_set, val_set);
    } else {
      session.emplace(cfg.train, mc, train_set, val_set, run_seed_for(base_seed, k), k);
    }
    while (!session->done()) {
      session->run_epoch(observer);
      if (cfg.checkpoint_every > 0 && !session->done() &&
          session->record().epochs_done % cfg.checkpoint_every == 0) {
        save_checkpoint(Checkpoint{session->record(), vocab_hash}, partial.string());
      }
    }
    runs[static_cast<size_t>(k)] = std::move(*session).take();
  };
  auto worker = [&] {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= cfg.train.n_seeds) return;
      try {
        run_one(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  if (jobs <= 1 || cfg.train.n_seeds == 1) {
    for (int k = 0; k < cfg.train.n_seeds; ++k) run_one(k);
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < std::min(jobs, cfg.train.n_seeds); ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  for (int k = 0; k < cfg.train.n_seeds; ++k) {
    write_metrics_csv(runs[static_cast<size_t>(k)],
                      (cell_dir / ("seed" + std::to_string(k) + ".metrics.csv")).string());
  }

  const int selected = select_best_run(runs);
  const RunRecord& best = runs[static_cast<size_t>(selected)];
  const fs::path selected_ckpt = cell_dir / "selected.ckpt";
  save_checkpoint(Checkpoint{best, vocab_hash}, selected_ckpt.string());

  CellOutcome outcome;
  outcome.selected_ckpt = selected_ckpt;
  outcome.row.regimen = cell.regimen;
  outcome.row.n = cell.n;
  outcome.row.hidden = cell.d;
  outcome.row.seed_selected = selected;
  outcome.row.val_acc = best.final_val_acc();
  outcome.row.test_acc = evaluate(best.params, rare_test);
  outcome.row.epochs = best.epochs_done;
  outcome.row.stop_reason = best.stop_reason ? stop_reason_name(*best.stop_reason) : "?";

  {
    nlohmann::json meta;
    meta["cell"] = cell_name;
    meta["seed_selected"] = selected;
    meta["val_acc"] = outcome.row.val_acc;
    meta["test_acc"] = outcome.row.test_acc;
    meta["epochs"] = outcome.row.epochs;
    meta["stop_reason"] = outcome.row.stop_reason;
    save_manifest(meta, (cell_dir / "cell.json").string());
  }

  const fs::path summary = paths.sweep_summary();
  const bool fresh = !fs::exists(summary);
  std::ofstream out(summary, std::ios::binary | std::ios::app);
  if (!out) throw IntegrityError("cannot write file: " + summary.string());
  if (fresh) out << kSweepHeader << '\n';
  out << sweep_row_csv(outcome.row) << '\n';
  return outcome;
}

// Trains every (regimen, length, hidden) cell in the config grid.
inline std::vector<CellOutcome> cmd_train_all(const ExperimentConfig& cfg, int jobs = 1,
                                              bool resume = false) {
  std::vector<CellOutcome> outcomes;
  for (const auto& regimen : cfg.regimens)
    for (int n : cfg.lengths)
      for (int d : cfg.hidden_sizes) {
        CellRef cell;
        cell.regimen = regimen;
        parse_regimen(regimen, &cell.k);
        cell.n = n;
        cell.d = d;
        outcomes.push_back(cmd_train_cell(cfg, cell, jobs, resume));
      }
  return outcomes;
}

// ---- eval ----

inline double cmd_eval(const std::string& ckpt_path, const std::string& data_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::vector<Example> examples = load_examples_jsonl(data_path);
  const fs::path manifest_path =
      fs::path(data_path).parent_path() /
      (fs::path(data_path).stem().string() + ".manifest.json");
  if (!ckpt.vocab_hash.empty() && fs::exists(manifest_path)) {
    const nlohmann::json manifest = load_manifest(manifest_path.string());
    const std::string data_hash = manifest.value("vocab_hash", "");
    if (!data_hash.empty() && data_hash != ckpt.vocab_hash)
      throw IntegrityError("checkpoint and dataset were built against different vocabularies");
  }
  return evaluate(ckpt.run.params, examples);
}

// ---- probe ----

struct ProbeOutcome {
  ProbeReport report;
  fs::path report_path;
};

inline ProbeOutcome cmd_probe(const std::string& ckpt_path, const std::string& data_path,
                              const std::string& dest_dir, int probe_examples = 100) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const LSTMParams& params = ckpt.run.params;
  const std::vector<Example> test = load_examples_jsonl(data_path);
  const fs::path manifest_path =
      fs::path(data_path).parent_path() /
      (fs::path(data_path).stem().string() + ".manifest.json");
  if (!ckpt.vocab_hash.empty() && fs::exists(manifest_path)) {
    const nlohmann::json manifest = load_manifest(manifest_path.string());
    const std::string data_hash = manifest.value("vocab_hash", "");
    if (!data_hash.empty() && data_hash != ckpt.vocab_hash)
      throw IntegrityError("checkpoint and dataset were built against different vocabularies");
  }

  fs::create_directories(dest_dir);
  const StateTable table = collect_states(params, test, probe_examples);
  ProbeReport report = make_probe_report(table);

  // Trace the two strongest cell-state neurons on the first correctly
  // classified test example.
  int64_t trace_example = 0;
  for (int64_t e = 0; e < static_cast<int64_t>(test.size()); ++e) {
    if (predict(params, test[static_cast<size_t>(e)].tokens) == test[static_cast<size_t>(e)].label) {
      trace_example = e;
      break;
    }
  }
  const int n = static_cast<int>(test[0].tokens.size());
  const int target = label_index(n) + 1;  // 1-based timestep of the label token
  nlohmann::json counting = nlohmann::json::array();
  for (size_t rank = 0; rank < report.per_neuron.size() && rank < 2; ++rank) {
    const int neuron = report.per_neuron[rank].neuron;
    const auto trace = trace_neuron(params, test[static_cast<size_t>(trace_example)], neuron,
                                    StateKind::kCell);
    const std::string file = "trace_c_" + std::to_string(neuron) + ".csv";
    write_trace_csv(trace, (fs::path(dest_dir) / file).string());
    report.traces.push_back(file);
  }

  // Counting-shape statistics for the top neuron, averaged over correctly
  // classified test examples.
  if (!report.per_neuron.empty() && n > target + 1) {
    const int top = report.per_neuron[0].neuron;
    double pre_sum = 0.0, post_sum = 0.0;
    int used = 0;
    for (size_t e = 0; e < test.size() && used < 20; ++e) {
      if (predict(params, test[e].tokens) != test[e].label) continue;
      const auto trace = trace_neuron(params, test[e], top, StateKind::kCell);
      const CountingStats stats = counting_shape_stats(trace, target);
      pre_sum += stats.pre_corr;
      post_sum += stats.post_mag_ratio;
      ++used;
    }
    if (used > 0) {
      counting.push_back({{"neuron", top},
                          {"pre_corr", pre_sum / used},
                          {"post_mag_ratio", post_sum / used},
                          {"examples", used}});
    }
  }

  nlohmann::json j = probe_report_json(report);
  j["counting"] = counting;
  ProbeOutcome outcome;
  outcome.report = std::move(report);
  outcome.report_path = fs::path(dest_dir) / "probe_report.json";
  save_manifest(j, outcome.report_path.string());
  return outcome;
}

// ---- report ----

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  for (;;) {
    const size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

inline std::vector<SweepRow> read_sweep_summary(const fs::path& path) {
  if (!fs::exists(path)) throw IntegrityError("no completed cells: missing " + path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw IntegrityError("malformed summary row: " + line);
    SweepRow r;
    r.regimen = f[0];
    r.n = std::stoi(f[1]);
    r.hidden = std::stoi(f[2]);
    r.seed_selected = std::stoi(f[3]);
    r.val_acc = std::stod(f[4]);
    r.test_acc = std::stod(f[5]);
    r.epochs = std::stoi(f[6]);
    r.stop_reason = f[7];
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IntegrityError("no completed cells in " + path.string());
  return rows;
}

}  // namespace detail

// Emits figure-data CSVs from completed cells: accuracy vs length per regimen
// at one hidden size, accuracy vs length per hidden size, and the
// validation/test convergence curve of each cell's selected run. Cells that
// never ran are simply absent.
inline std::vector<fs::path> cmd_report(const ExperimentConfig& cfg, int fig1_hidden = 0) {
  OutPaths paths(cfg.out);
  std::vector<SweepRow> rows = detail::read_sweep_summary(paths.sweep_summary());

  // Last row wins per cell (reruns append).
  std::map<std::tuple<std::string, int, int>, SweepRow> cells;
  for (auto& r : rows) cells[{r.regimen, r.n, r.hidden}] = r;

  fs::create_directories(paths.report_dir());
  std::vector<fs::path> written;

  int hidden = fig1_hidden;
  if (hidden == 0) {
    hidden = std::numeric_limits<int>::max();
    for (const auto& [key, r] : cells) hidden = std::min(hidden, r.hidden);
  }
  {
    const fs::path p = paths.report_dir() / "fig1_accuracy_by_regimen.csv";
    std::ofstream out(p, std::ios::binary);
    out << "regimen,n,test_acc\n";
    char buf[128];
    for (const auto& [key, r] : cells) {
      if (r.hidden != hidden) continue;
      std::snprintf(buf, sizeof(buf), "%s,%d,%.9g\n", r.regimen.c_str(), r.n, r.test_acc);
      out << buf;
    }
    written.push_back(p);
  }
  {
    const fs::path p = paths.report_dir() / "fig2_accuracy_by_hidden.csv";
    std::ofstream out(p, std::ios::binary);
    out << "regimen,hidden,n,test_acc\n";
    char buf[128];
    for (const auto& [key, r] : cells) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.9g\n", r.regimen.c_str(), r.hidden, r.n,
                    r.test_acc);
      out << buf;
    }
    written.push_back(p);
  }
  for (const auto& [key, r] : cells) {
    const std::string cell = OutPaths::cell_name(r.regimen, r.n, r.hidden);
    const fs::path metrics =
        paths.cell_dir(cell) / ("seed" + std::to_string(r.seed_selected) + ".metrics.csv");
    if (!fs::exists(metrics)) continue;
    std::ifstream in(metrics);
    std::string line;
    std::getline(in, line);  // header
    const fs::path p = paths.report_dir() / ("fig4_" + cell + ".csv");
    std::ofstream out(p, std::ios::binary);
    out << "epoch,val_acc,test_acc\n";
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 6) throw IntegrityError("malformed metrics row in " + metrics.string());
      out << f[0] << ',' << f[3] << ',' << f[4] << '\n';
    }
    written.push_back(p);
  }
  return written;
}

}  // namespace seqrecall
