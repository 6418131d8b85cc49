#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <map>

#include "seqrecall/corpus.hpp"
#include "support/oracles.hpp"

using namespace seqrecall;

TEST_CASE("tokenize: whitespace runs, eos handling, encoding errors") {
  TokenizeOptions no_eos;
  no_eos.add_eos = false;

  CHECK(tokenize("the cat sat", no_eos) == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(tokenize("a\n\nb", no_eos) == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("a  b\tc", no_eos) == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize("", no_eos).empty());

  TokenizeOptions eos;  // default on
  CHECK(tokenize("a b\nc\n", eos) == std::vector<std::string>{"a", "b", "<eos>", "c", "<eos>"});
  CHECK(tokenize("a\n\nb", eos) == std::vector<std::string>{"a", "<eos>", "b", "<eos>"});

  const std::string bad = std::string("ok ") + char(0xC0) + char(0x20);
  CHECK_THROWS_AS(tokenize(bad, no_eos), IntegrityError);
}

TEST_CASE("build_vocab: frequency ordering, ties, truncation to unknown") {
  {
    const Vocabulary v = build_vocab({"a", "a", "b"}, 10);
    REQUIRE(v.size() == 2);
    CHECK(v.id_of.at("a") == 0);
    CHECK(v.id_of.at("b") == 1);
    CHECK(v.freq[0] == 2);
    CHECK(v.freq[1] == 1);
    CHECK_FALSE(v.has_unknown());
  }
  {
    // Frequency ties break lexicographically.
    const Vocabulary v = build_vocab({"b", "a"}, 10);
    CHECK(v.id_of.at("a") == 0);
    CHECK(v.id_of.at("b") == 1);
  }
  {
    // Truncation introduces the reserved unknown type.
    const Vocabulary v = build_vocab({"a", "b"}, 1);
    REQUIRE(v.size() == 2);
    REQUIRE(v.has_unknown());
    CHECK(v.encode_token("b", true) == v.unk_id);
    CHECK_THROWS_AS(v.encode_token("b", false), IntegrityError);
    // Total frequency mass is preserved.
    CHECK(v.freq[0] + v.freq[1] == 2);
  }
  CHECK_THROWS_AS(build_vocab({}, 10), std::invalid_argument);
}

TEST_CASE("build_vocab: frequency table equals an independent counting pass") {
  RandomStream rng(21, "vocab-prop");
  std::vector<std::string> tokens;
  for (int i = 0; i < 5000; ++i)
    tokens.push_back("t" + std::to_string(rng.next_below(37)));
  const Vocabulary v = build_vocab(tokens, 1000);

  std::map<std::string, int64_t> counted;
  for (const auto& t : tokens) ++counted[t];
  REQUIRE(v.size() == static_cast<int32_t>(counted.size()));
  int64_t total = 0;
  for (int32_t id = 0; id < v.size(); ++id) {
    CHECK(v.freq[id] == counted.at(v.token_of[id]));
    total += v.freq[id];
  }
  CHECK(total == static_cast<int64_t>(tokens.size()));
  // Ids are ordered by descending frequency.
  for (int32_t id = 1; id < v.size(); ++id) CHECK(v.freq[id - 1] >= v.freq[id]);
}

TEST_CASE("encode/decode round-trip for in-vocabulary input") {
  RandomStream rng(22, "roundtrip");
  std::vector<std::string> tokens;
  for (int i = 0; i < 2000; ++i)
    tokens.push_back("w" + std::to_string(rng.next_below(50)));
  const Vocabulary v = build_vocab(tokens, 100);
  const TokenStream s = encode(tokens, v, "test");
  CHECK(decode(s.ids, v) == tokens);
  for (int32_t id : s.ids) CHECK(id < v.size());
}

TEST_CASE("rarest_types: ordering, ties, nesting") {
  const Vocabulary v = build_vocab({"a", "a", "a", "a", "a", "b", "c"}, 10);
  const auto rare2 = rarest_types(v, 2);
  REQUIRE(rare2.size() == 2);
  CHECK(v.token_of[rare2[0]] == "b");
  CHECK(v.token_of[rare2[1]] == "c");

  CHECK(rarest_types(v, v.size()).size() == static_cast<size_t>(v.size()));
  CHECK_THROWS_AS(rarest_types(v, v.size() + 1), std::invalid_argument);

  // rarest(k) is a subset of rarest(k+1).
  RandomStream rng(23, "rare-prop");
  std::vector<std::string> tokens;
  for (int i = 0; i < 3000; ++i)
    tokens.push_back("t" + std::to_string(rng.next_below(64)));
  const Vocabulary big = build_vocab(tokens, 1000);
  for (int32_t k = 1; k < big.size(); ++k) {
    const auto small_set = rarest_types(big, k);
    const auto next = rarest_types(big, k + 1);
    for (int32_t id : small_set)
      CHECK(std::find(next.begin(), next.end(), id) != next.end());
  }
}

TEST_CASE("rarest_types: sort oracle on a synthetic corpus") {
  const TokenStream s =
      synth_corpus(RandomStream(31, "rare-oracle"), 200000, 500, 1.0, 0);
  std::vector<std::string> tokens;
  tokens.reserve(s.ids.size());
  for (int32_t id : s.ids) tokens.push_back("w" + std::to_string(id));
  const Vocabulary v = build_vocab(tokens, 500);
  const auto rare = rarest_types(v, 100);
  REQUIRE(rare.size() == 100);
  int64_t max_rare_freq = 0;
  for (int32_t id : rare) max_rare_freq = std::max(max_rare_freq, v.freq[id]);
  std::vector<bool> in_rare(static_cast<size_t>(v.size()), false);
  for (int32_t id : rare) in_rare[static_cast<size_t>(id)] = true;
  for (int32_t id = 0; id < v.size(); ++id)
    if (!in_rare[static_cast<size_t>(id)]) CHECK(v.freq[id] >= max_rare_freq);
}

TEST_CASE("synth_corpus: uniform case passes a chi-square test") {
  const int32_t V = 1000;
  const int64_t T = 1000000;
  const TokenStream s = synth_corpus(RandomStream(41, "synth-uniform"), T, V, 0.0, 0);
  REQUIRE(static_cast<int64_t>(s.ids.size()) == T);
  std::vector<int64_t> counts(V, 0);
  for (int32_t id : s.ids) ++counts[static_cast<size_t>(id)];
  const std::vector<double> expected(V, static_cast<double>(T) / V);
  CHECK(oracles::chi_square_gof_pvalue(counts, expected) > 0.01);
}

TEST_CASE("synth_corpus: zipf_s=1 gives a log-log slope of -1 within 0.1") {
  const int32_t V = 1000;
  const int64_t T = 1000000;
  const TokenStream s = synth_corpus(RandomStream(43, "synth-zipf"), T, V, 1.0, 0);
  std::vector<int64_t> counts(V, 0);
  for (int32_t id : s.ids) ++counts[static_cast<size_t>(id)];
  // Ranks are sampling ranks by construction (id r has weight (r+1)^-1).
  std::vector<double> log_rank, log_freq;
  for (int32_t r = 0; r < V; ++r) {
    if (counts[static_cast<size_t>(r)] == 0) continue;
    log_rank.push_back(std::log(static_cast<double>(r + 1)));
    log_freq.push_back(std::log(static_cast<double>(counts[static_cast<size_t>(r)])));
  }
  const auto [slope, intercept] = oracles::ols_line(log_rank, log_freq);
  CHECK(slope == Catch::Approx(-1.0).margin(0.1));
}

TEST_CASE("synth_corpus: determinism and markov stickiness") {
  const TokenStream a = synth_corpus(RandomStream(44, "synth-det"), 5000, 200, 1.0, 2);
  const TokenStream b = synth_corpus(RandomStream(44, "synth-det"), 5000, 200, 1.0, 2);
  CHECK(a.ids == b.ids);

  // With full stickiness and a single successor, an order-1 chain has a
  // deterministic successor function.
  SynthOptions opts;
  opts.successors = 1;
  opts.stickiness = 1.0;
  const TokenStream chain = synth_corpus(RandomStream(45, "synth-chain"), 20000, 100, 1.0, 1, opts);
  std::map<int32_t, int32_t> successor;
  for (size_t i = 1; i < chain.ids.size(); ++i) {
    const auto [it, inserted] = successor.emplace(chain.ids[i - 1], chain.ids[i]);
    if (!inserted) CHECK(it->second == chain.ids[i]);
  }

  CHECK_THROWS_AS(synth_corpus(RandomStream(0, "x"), 10, 1, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(synth_corpus(RandomStream(0, "x"), 0, 10, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(synth_corpus(RandomStream(0, "x"), 10, 10, -0.5, 0), std::invalid_argument);
}

TEST_CASE("vocabulary TSV export/import round-trips") {
  const Vocabulary v = build_vocab({"b", "a", "a", "c", "a", "b"}, 2);  // forces unknown
  const auto path = std::filesystem::temp_directory_path() / "seqrecall_vocab_test.tsv";
  save_vocab(v, path.string());
  const Vocabulary r = load_vocab(path.string());
  REQUIRE(r.size() == v.size());
  for (int32_t id = 0; id < v.size(); ++id) {
    CHECK(r.token_of[id] == v.token_of[id]);
    CHECK(r.freq[id] == v.freq[id]);
  }
  CHECK(r.unk_id == v.unk_id);
  std::filesystem::remove(path);
}
