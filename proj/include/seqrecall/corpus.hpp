#pragma once

// Corpus ingestion: whitespace tokenization, frequency-ranked vocabulary,
// rare-type selection, and a synthetic Zipf-Markov corpus for when no real
// corpus file is available.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqrecall/numkit.hpp"

namespace seqrecall {

inline constexpr const char* kUnknownToken = "<unk>";

// Token <-> dense id bijection with per-type corpus frequencies.
// Ids are assigned by descending frequency, ties broken lexicographically.
struct Vocabulary {
  std::unordered_map<std::string, int32_t> id_of;
  std::vector<std::string> token_of;
  std::vector<int64_t> freq;
  int32_t unk_id = -1;  // >= 0 only when truncation introduced a sink type

  int32_t size() const { return static_cast<int32_t>(token_of.size()); }
  bool has_unknown() const { return unk_id >= 0; }

  int32_t encode_token(const std::string& tok, bool map_oov = false) const {
    auto it = id_of.find(tok);
    if (it != id_of.end()) return it->second;
    if (map_oov && has_unknown()) return unk_id;
    throw IntegrityError("encode: out-of-vocabulary token '" + tok + "'");
  }
};

struct TokenStream {
  std::vector<int32_t> ids;
  std::string source;
};

struct TokenizeOptions {
  bool add_eos = true;  // append eos after each non-empty line (PTB parity)
  std::string eos = "<eos>";
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
  size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    size_t extra;
    if (b < 0x80) extra = 0;
    else if ((b & 0xE0) == 0xC0 && b >= 0xC2) extra = 1;
    else if ((b & 0xF0) == 0xE0) extra = 2;
    else if ((b & 0xF8) == 0xF0 && b <= 0xF4) extra = 3;
    else return false;
    if (i + extra >= s.size()) return false;
    for (size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace detail

// Splits on runs of whitespace. Line boundaries optionally emit an
// end-of-sentence token; blank lines never do.
inline std::vector<std::string> tokenize(std::string_view text,
                                         const TokenizeOptions& opts = {}) {
  if (!detail::valid_utf8(text)) throw IntegrityError("tokenize: invalid UTF-8 input");
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    bool any = false;
    size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && detail::is_space(line[i])) ++i;
      size_t j = i;
      while (j < line.size() && !detail::is_space(line[j])) ++j;
      if (j > i) {
        out.emplace_back(line.substr(i, j - i));
        any = true;
      }
      i = j;
    }
    if (any && opts.add_eos) out.push_back(opts.eos);
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  return out;
}

// Keeps the max_types most frequent types (ties lexicographic). Remaining
// occurrences aggregate into a reserved unknown type, added only when
// truncation actually happens. Ids by descending frequency then token order.
inline Vocabulary build_vocab(const std::vector<std::string>& tokens, int32_t max_types) {
  if (tokens.empty()) throw std::invalid_argument("build_vocab: empty token sequence");
  if (max_types < 1) throw std::invalid_argument("build_vocab: max_types must be >= 1");

  std::unordered_map<std::string, int64_t> counts;
  for (const auto& t : tokens) ++counts[t];

  std::vector<std::pair<std::string, int64_t>> types(counts.begin(), counts.end());
  std::sort(types.begin(), types.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  const size_t kept = std::min<size_t>(types.size(), static_cast<size_t>(max_types));
  bool truncated = kept < types.size();

  std::vector<std::pair<std::string, int64_t>> table(types.begin(), types.begin() + kept);
  std::vector<std::string> dropped;
  if (truncated) {
    int64_t oov_count = 0;
    for (size_t i = kept; i < types.size(); ++i) oov_count += types[i].second;
    auto it = std::find_if(table.begin(), table.end(),
                           [](const auto& p) { return p.first == kUnknownToken; });
    if (it != table.end()) {
      it->second += oov_count;
    } else {
      table.emplace_back(kUnknownToken, oov_count);
    }
    std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
  }

  Vocabulary v;
  v.token_of.reserve(table.size());
  v.freq.reserve(table.size());
  for (const auto& [tok, f] : table) {
    v.id_of.emplace(tok, static_cast<int32_t>(v.token_of.size()));
    v.token_of.push_back(tok);
    v.freq.push_back(f);
  }
  if (truncated) v.unk_id = v.id_of.at(kUnknownToken);
  return v;
}

inline TokenStream encode(const std::vector<std::string>& tokens, const Vocabulary& v,
                          std::string source, bool map_oov = false) {
  TokenStream s;
  s.ids.reserve(tokens.size());
  for (const auto& t : tokens) s.ids.push_back(v.encode_token(t, map_oov));
  s.source = std::move(source);
  return s;
}

inline std::vector<std::string> decode(const std::vector<int32_t>& ids, const Vocabulary& v) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int32_t id : ids) {
    if (id < 0 || id >= v.size()) throw std::invalid_argument("decode: id out of range");
    out.push_back(v.token_of[id]);
  }
  return out;
}

// The k lowest-frequency type ids, ties broken by token string.
inline std::vector<int32_t> rarest_types(const Vocabulary& v, int32_t k) {
  if (k < 0 || k > v.size()) throw std::invalid_argument("rarest_types: k out of range");
  std::vector<int32_t> ids(v.size());
  for (int32_t i = 0; i < v.size(); ++i) ids[i] = i;
  std::sort(ids.begin(), ids.end(), [&](int32_t a, int32_t b) {
    if (v.freq[a] != v.freq[b]) return v.freq[a] < v.freq[b];
    return v.token_of[a] < v.token_of[b];
  });
  ids.resize(k);
  return ids;
}

struct SynthOptions {
  int successors = 3;      // candidate set size per Markov context
  double stickiness = 0.8; // probability of drawing from the candidate set
};

namespace detail {

// Draws ranks with P(rank r) proportional to (r+1)^(-s), r in [0, V).
class ZipfSampler {
 public:
  ZipfSampler(int32_t V, double s) : cum_(V) {
    double acc = 0.0;
    for (int32_t r = 0; r < V; ++r) {
      acc += std::pow(static_cast<double>(r + 1), -s);
      cum_[r] = acc;
    }
    for (auto& c : cum_) c /= acc;
  }

  int32_t draw(RandomStream& rng) const {
    const double u = rng.next_double();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    if (it == cum_.end()) --it;
    return static_cast<int32_t>(it - cum_.begin());
  }

 private:
  std::vector<double> cum_;
};

}  // namespace detail

// Synthetic corpus: unigram distribution proportional to rank^(-zipf_s).
// markov_order > 0 adds sticky order-m structure: each context hashes to a
// fixed small successor set that is preferred with probability `stickiness`.
inline TokenStream synth_corpus(RandomStream rng, int64_t n_tokens, int32_t V, double zipf_s,
                                int markov_order, const SynthOptions& opts = {}) {
  if (V < 2) throw std::invalid_argument("synth_corpus: V must be >= 2");
  if (n_tokens < 1) throw std::invalid_argument("synth_corpus: n_tokens must be >= 1");
  if (zipf_s < 0.0) throw std::invalid_argument("synth_corpus: zipf_s must be >= 0");
  if (markov_order < 0) throw std::invalid_argument("synth_corpus: markov_order must be >= 0");

  detail::ZipfSampler base(V, zipf_s);
  RandomStream draw_rng = rng.derive("draws");
  const uint64_t ctx_salt = rng.derive("context-salt").next_u64();

  TokenStream out;
  out.ids.reserve(static_cast<size_t>(n_tokens));
  {
    std::ostringstream src;
    src << "synth(V=" << V << ",s=" << zipf_s << ",m=" << markov_order
        << ",T=" << n_tokens << ")";
    out.source = src.str();
  }

  if (markov_order == 0) {
    for (int64_t i = 0; i < n_tokens; ++i) out.ids.push_back(base.draw(draw_rng));
    return out;
  }

  const int m = markov_order;
  for (int i = 0; i < m && static_cast<int64_t>(out.ids.size()) < n_tokens; ++i) {
    out.ids.push_back(base.draw(draw_rng));
  }
  while (static_cast<int64_t>(out.ids.size()) < n_tokens) {
    const size_t pos = out.ids.size();
    const uint64_t ctx_hash =
        fnv1a64(out.ids.data() + (pos - m), sizeof(int32_t) * static_cast<size_t>(m), ctx_salt);
    if (draw_rng.next_double() < opts.stickiness) {
      // Successor candidates are a pure function of the context, drawn from
      // the same Zipf base so the marginal stays Zipfian.
      RandomStream ctx_rng = RandomStream(ctx_salt, "succ").derive("ctx", ctx_hash);
      const auto pick = draw_rng.next_below(static_cast<uint64_t>(opts.successors));
      int32_t candidate = 0;
      for (uint64_t i = 0; i <= pick; ++i) candidate = base.draw(ctx_rng);
      out.ids.push_back(candidate);
    } else {
      out.ids.push_back(base.draw(draw_rng));
    }
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One `token<TAB>frequency` line per type, in id order.
inline void save_vocab(const Vocabulary& v, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write file: " + path);
  for (int32_t i = 0; i < v.size(); ++i)
    out << v.token_of[i] << '\t' << v.freq[i] << '\n';
}

inline Vocabulary load_vocab(const std::string& path) {
  const std::string text = read_text_file(path);
  Vocabulary v;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty()) {
      const size_t tab = line.find('\t');
      if (tab == std::string_view::npos)
        throw IntegrityError("malformed vocabulary line in " + path);
      std::string tok(line.substr(0, tab));
      const int64_t f = std::stoll(std::string(line.substr(tab + 1)));
      v.id_of.emplace(tok, static_cast<int32_t>(v.token_of.size()));
      v.token_of.push_back(std::move(tok));
      v.freq.push_back(f);
    }
    pos = eol + 1;
  }
  if (v.size() == 0) throw IntegrityError("empty vocabulary file: " + path);
  auto it = v.id_of.find(kUnknownToken);
  if (it != v.id_of.end()) v.unk_id = it->second;
  return v;
}

}  // namespace seqrecall
