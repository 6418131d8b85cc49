#pragma once

// The five training regimens, the adversarial rare-word test set, and the
// validation split. Every example's label is the token at the middle
// position; all sequences within a dataset share one length.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "seqrecall/corpus.hpp"
#include "seqrecall/numkit.hpp"

namespace seqrecall {

struct Example {
  std::vector<int32_t> tokens;
  int32_t label = 0;
};

enum class Regimen { kUniform, kUnigram, kKgram, kLanguage, kRareTest };

inline std::string regimen_name(Regimen r, int k = 0) {
  switch (r) {
    case Regimen::kUniform: return "uniform";
    case Regimen::kUnigram: return "unigram";
    case Regimen::kKgram: return std::to_string(k) + "gram";
    case Regimen::kLanguage: return "language";
    case Regimen::kRareTest: return "rare";
  }
  return "?";
}

inline Regimen parse_regimen(const std::string& name, int* k_out = nullptr) {
  if (k_out) *k_out = 0;
  if (name == "uniform") return Regimen::kUniform;
  if (name == "unigram") return Regimen::kUnigram;
  if (name == "language") return Regimen::kLanguage;
  if (name == "rare") return Regimen::kRareTest;
  const size_t g = name.rfind("gram");
  if (g != std::string::npos && g > 0 && g + 4 == name.size()) {
    const int k = std::stoi(name.substr(0, g));
    if (k >= 1) {
      if (k_out) *k_out = k;
      return Regimen::kKgram;
    }
  }
  throw std::invalid_argument("unknown regimen: " + name);
}

struct DatasetSpec {
  Regimen regimen = Regimen::kUniform;
  int k = 0;  // kgram chunk length; 0 otherwise
  int n = 0;
  int64_t count = 0;
  uint64_t seed = 0;
  std::string source;
};

// 0-based position of the label token: n even -> n/2 (the (n/2 + 1)th token,
// 1-based), n odd -> the middle.
inline int label_index(int n) {
  if (n < 1) throw std::invalid_argument("label_index: n must be >= 1");
  return n / 2;
}

namespace detail {

inline void fisher_yates(std::vector<int32_t>& v, RandomStream& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = rng.next_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Consecutive non-overlapping windows of length n; tail discarded.
inline std::vector<Example> window(const std::vector<int32_t>& ids, int n) {
  const int64_t count = static_cast<int64_t>(ids.size()) / n;
  const int li = label_index(n);
  std::vector<Example> out;
  out.reserve(static_cast<size_t>(count));
  for (int64_t e = 0; e < count; ++e) {
    Example ex;
    ex.tokens.assign(ids.begin() + e * n, ids.begin() + (e + 1) * n);
    ex.label = ex.tokens[li];
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace detail

// Every token i.i.d. uniform over [0, V).
inline std::vector<Example> gen_uniform(int32_t V, int n, int64_t count, uint64_t seed) {
  if (V < 2) throw std::invalid_argument("gen_uniform: V must be >= 2");
  if (n < 2) throw std::invalid_argument("gen_uniform: n must be >= 2");
  if (count < 1) throw std::invalid_argument("gen_uniform: count must be >= 1");
  RandomStream rng(seed, "gen-uniform");
  const int li = label_index(n);
  std::vector<Example> out(static_cast<size_t>(count));
  for (auto& ex : out) {
    ex.tokens.resize(n);
    for (int t = 0; t < n; ++t)
      ex.tokens[t] = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(V)));
    ex.label = ex.tokens[li];
  }
  return out;
}

// Corpus partitioned into k-length chunks (short tail discarded), chunk order
// uniformly permuted, then windowed into length-n examples.
inline std::vector<Example> gen_kgram(const TokenStream& corpus, int k, int n, uint64_t seed) {
  if (k < 1) throw std::invalid_argument("gen_kgram: k must be >= 1");
  if (n < 2) throw std::invalid_argument("gen_kgram: n must be >= 2");
  if (static_cast<int64_t>(corpus.ids.size()) < k)
    throw std::invalid_argument("gen_kgram: corpus shorter than chunk length");
  const int64_t n_chunks = static_cast<int64_t>(corpus.ids.size()) / k;
  std::vector<int32_t> order(static_cast<size_t>(n_chunks));
  for (int64_t i = 0; i < n_chunks; ++i) order[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  RandomStream rng(seed, "chunk-permutation");
  detail::fisher_yates(order, rng);
  std::vector<int32_t> ids;
  ids.reserve(static_cast<size_t>(n_chunks) * k);
  for (int32_t c : order) {
    const auto begin = corpus.ids.begin() + static_cast<int64_t>(c) * k;
    ids.insert(ids.end(), begin, begin + k);
  }
  return detail::window(ids, n);
}

// Token-level permutation of the whole corpus; the k = 1 chunk case.
inline std::vector<Example> gen_unigram(const TokenStream& corpus, int n, uint64_t seed) {
  if (static_cast<int64_t>(corpus.ids.size()) < n)
    throw std::invalid_argument("gen_unigram: corpus shorter than n");
  return gen_kgram(corpus, 1, n, seed);
}

// Consecutive windows in original corpus order.
inline std::vector<Example> gen_language(const TokenStream& corpus, int n) {
  if (n < 2) throw std::invalid_argument("gen_language: n must be >= 2");
  if (static_cast<int64_t>(corpus.ids.size()) < n)
    throw std::invalid_argument("gen_language: corpus shorter than n");
  return detail::window(corpus.ids, n);
}

// Every token i.i.d. uniform over the rare_set_size rarest types.
inline std::vector<Example> gen_rare_test(const Vocabulary& vocab, int n, int64_t count,
                                          uint64_t seed, int32_t rare_set_size = 100) {
  if (vocab.size() < rare_set_size)
    throw std::invalid_argument("gen_rare_test: vocabulary smaller than rare set");
  if (n < 2) throw std::invalid_argument("gen_rare_test: n must be >= 2");
  if (count < 1) throw std::invalid_argument("gen_rare_test: count must be >= 1");
  const std::vector<int32_t> rare = rarest_types(vocab, rare_set_size);
  RandomStream rng(seed, "gen-rare-test");
  const int li = label_index(n);
  std::vector<Example> out(static_cast<size_t>(count));
  for (auto& ex : out) {
    ex.tokens.resize(n);
    for (int t = 0; t < n; ++t)
      ex.tokens[t] = rare[rng.next_below(rare.size())];
    ex.label = ex.tokens[li];
  }
  return out;
}

// Disjoint uniform-random split; |validation| = round(frac * N).
inline std::pair<std::vector<Example>, std::vector<Example>> split_validation(
    const std::vector<Example>& examples, double frac, uint64_t seed) {
  if (!(frac > 0.0 && frac < 1.0))
    throw std::invalid_argument("split_validation: frac must be in (0, 1)");
  const int64_t N = static_cast<int64_t>(examples.size());
  const int64_t n_val = std::llround(frac * static_cast<double>(N));
  if (n_val < 1 || n_val >= N)
    throw std::invalid_argument("split_validation: split would leave a side empty");
  std::vector<int32_t> order(static_cast<size_t>(N));
  for (int64_t i = 0; i < N; ++i) order[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  RandomStream rng(seed, "validation-split");
  detail::fisher_yates(order, rng);
  std::vector<Example> train, val;
  train.reserve(static_cast<size_t>(N - n_val));
  val.reserve(static_cast<size_t>(n_val));
  for (int64_t i = 0; i < N; ++i) {
    if (i < n_val) val.push_back(examples[order[static_cast<size_t>(i)]]);
    else train.push_back(examples[order[static_cast<size_t>(i)]]);
  }
  return {std::move(train), std::move(val)};
}

// ---- dataset files: JSON Lines plus a sidecar manifest ----

inline void save_examples_jsonl(const std::vector<Example>& examples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write file: " + path);
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["tokens"] = ex.tokens;
    j["label"] = ex.label;
    out << j.dump() << '\n';
  }
}

inline std::vector<Example> load_examples_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open file: " + path);
  std::vector<Example> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Example ex;
    ex.tokens = j.at("tokens").get<std::vector<int32_t>>();
    ex.label = j.at("label").get<int32_t>();
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw IntegrityError("empty dataset file: " + path);
  return out;
}

inline std::string to_hex(uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string file_hash_hex(const std::string& path) {
  const std::string bytes = read_text_file(path);
  return to_hex(fnv1a64(bytes));
}

inline nlohmann::json manifest_json(const DatasetSpec& spec, const std::string& data_file,
                                    const std::string& vocab_hash) {
  nlohmann::json j;
  j["regimen"] = regimen_name(spec.regimen, spec.k);
  if (spec.regimen == Regimen::kKgram) j["k"] = spec.k;
  j["n"] = spec.n;
  j["count"] = spec.count;
  j["seed"] = spec.seed;
  j["source"] = spec.source;
  j["file"] = data_file;
  j["vocab_hash"] = vocab_hash;
  return j;
}

inline void save_manifest(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json load_manifest(const std::string& path) {
  return nlohmann::json::parse(read_text_file(path));
}

}  // namespace seqrecall
