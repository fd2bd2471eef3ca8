#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "natlab/data/corpus.hpp"

using namespace natlab;
using data::GeneratorSpec;
using data::TokenSeq;

namespace {

GeneratorSpec two_mode_spec() {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::TwoMode;
  int a = data::kFirstToken, b = a + 1, c = a + 2, d = a + 3;
  spec.sources.push_back({{a, b}, {{{a, b}, 0.5}, {{c, d}, 0.5}}});
  spec.sources.push_back({{c}, {{{b, a}, 0.25}, {{d, c}, 0.75}}});
  return spec;
}

GeneratorSpec markov_spec() {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::MarkovCorruption;
  spec.num_tokens = 4;
  spec.init_dist = {0.25, 0.25, 0.25, 0.25};
  spec.trans = {{0.7, 0.1, 0.1, 0.1},
                {0.1, 0.7, 0.1, 0.1},
                {0.1, 0.1, 0.7, 0.1},
                {0.1, 0.1, 0.1, 0.7}};
  spec.replace_rate = 0.2;
  spec.drop_rate = 0.1;
  spec.len_min = 3;
  spec.len_max = 6;
  return spec;
}

}  // namespace

TEST_CASE("token text round trip") {
  TokenSeq seq = {data::kBos, data::kFirstToken, data::kFirstToken + 12, data::kEps};
  CHECK(data::text_to_seq(data::seq_to_text(seq)) == seq);
  CHECK(data::seq_to_text({data::kFirstToken}) == "w0");
  CHECK_THROWS(data::text_to_seq("nonsense"));
}

TEST_CASE("two-mode generation matches its enumerable conditional") {
  GeneratorSpec spec = two_mode_spec();
  auto [corpus, cond] = data::gen_two_mode(spec, 500, 11);
  CHECK(corpus.pairs.size() == 500);
  CHECK(cond.by_source.size() == 2);
  for (const auto& [x, y] : corpus.pairs) {
    bool found = false;
    for (const auto& [seq, p] : cond.by_source.at(x))
      if (seq == y) found = true;
    CHECK(found);
  }
  // empirical mode frequency near 0.75 for the skewed source
  int n = 0, hits = 0;
  for (const auto& [x, y] : corpus.pairs) {
    if (x != TokenSeq{data::kFirstToken + 2}) continue;
    ++n;
    if (y == TokenSeq{data::kFirstToken + 3, data::kFirstToken + 2}) ++hits;
  }
  CHECK(n > 100);
  CHECK(std::abs(static_cast<double>(hits) / n - 0.75) < 0.1);
}

TEST_CASE("preset multi-mode generators have the advertised structure") {
  for (bool shifted : {false, true}) {
    GeneratorSpec spec = shifted ? data::shift_spec(10, 6, 24, 3)
                                 : data::reversal_spec(10, 6, 24, 3);
    CHECK(spec.sources.size() == 10);
    std::set<TokenSeq> seen;
    for (const auto& [x, modes] : spec.sources) {
      CHECK(seen.insert(x).second);  // sources are distinct
      REQUIRE(modes.size() == 2);
      CHECK(modes[0].prob == 0.5);
      const TokenSeq& a = modes[0].seq;
      const TokenSeq& b = modes[1].seq;
      REQUIRE(a.size() == 6);
      REQUIRE(b.size() == 6);
      std::set<int> tokens(a.begin(), a.end());
      tokens.insert(b.begin(), b.end());
      if (shifted) {
        // one-position shifts of a common 7-token window
        CHECK(tokens.size() == 7);
        CHECK(TokenSeq(a.begin() + 1, a.end()) == TokenSeq(b.begin(), b.end() - 1));
      } else {
        CHECK(tokens.size() == 6);
        CHECK(TokenSeq(a.rbegin(), a.rend()) == b);
      }
      // the modes disagree at every position, so C = len - 1 bits/sentence
      for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] != b[i]);
    }
  }
  CHECK_THROWS_AS(data::shift_spec(4, 6, 6, 1), data::CorpusError);
}

TEST_CASE("generator validation rejects malformed specs") {
  GeneratorSpec bad = two_mode_spec();
  bad.sources[0].second[0].prob = 0.6;  // sums to 1.1
  CHECK_THROWS_AS(bad.validate(), data::CorpusError);

  GeneratorSpec m = markov_spec();
  m.replace_rate = 1.5;
  CHECK_THROWS_AS(m.validate(), data::CorpusError);
  m = markov_spec();
  m.num_tokens = 0;
  m.init_dist.clear();
  m.trans.clear();
  CHECK_THROWS_AS(m.validate(), data::CorpusError);
}

TEST_CASE("synthetic generation is deterministic and well-formed") {
  GeneratorSpec spec = markov_spec();
  data::ParallelCorpus a = data::gen_synthetic(spec, 200, 5);
  data::ParallelCorpus b = data::gen_synthetic(spec, 200, 5);
  CHECK(a == b);
  for (const auto& [x, y] : a.pairs) {
    CHECK(!x.empty());
    CHECK(static_cast<int>(y.size()) >= spec.len_min);
    CHECK(static_cast<int>(y.size()) <= spec.len_max);
    for (int t : y) {
      CHECK(t >= data::kFirstToken);
      CHECK(t < spec.vocab_size());
    }
  }
}

TEST_CASE("two-mode reference sampling is exact") {
  GeneratorSpec spec = two_mode_spec();
  TokenSeq x = {data::kFirstToken + 2};
  std::vector<TokenSeq> refs = data::sample_references(spec, x, 2000, 3);
  int hits = 0;
  for (const TokenSeq& r : refs)
    if (r == TokenSeq{data::kFirstToken + 3, data::kFirstToken + 2}) ++hits;
  CHECK(std::abs(hits / 2000.0 - 0.75) < 0.05);
  CHECK_THROWS_AS(data::sample_references(spec, {data::kFirstToken + 3}, 1, 3),
                  data::CorpusError);
}

TEST_CASE("markov reference sampling respects the source length") {
  GeneratorSpec spec = markov_spec();
  spec.drop_rate = 0.0;  // keep lengths aligned so rejection can succeed
  data::ParallelCorpus corpus = data::gen_synthetic(spec, 5, 17);
  const auto& [x, y] = corpus.pairs[0];
  std::vector<TokenSeq> refs = data::sample_references(spec, x, 20, 9, &y);
  for (const TokenSeq& r : refs) CHECK(r.size() == x.size());
}

TEST_CASE("corpus save/load round trip, including references") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "natlab_test_data";
  fs::create_directories(dir);

  GeneratorSpec spec = two_mode_spec();
  auto [corpus, cond] = data::gen_two_mode(spec, 50, 23);
  data::attach_references(corpus, 4, 29);
  std::string path = (dir / "two_mode.tsv").string();
  data::save_corpus(corpus, path);
  CHECK(data::load_corpus(path) == corpus);

  data::ParallelCorpus syn = data::gen_synthetic(markov_spec(), 50, 31);
  data::attach_references(syn, 4, 37);
  std::string spath = (dir / "markov.tsv").string();
  data::save_corpus(syn, spath);
  CHECK(data::load_corpus(spath) == syn);

  fs::remove_all(dir);
}

TEST_CASE("load errors carry line numbers") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "natlab_test_data2";
  fs::create_directories(dir);
  std::string path = (dir / "bad.tsv").string();
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("#! kind two_mode\n#! n_sources 1\n#! source 0 w0\n", f);
    std::fputs("#! mode 0 0x1p-1 w0\n#! mode 0 0x1p-1 w1\n", f);
    std::fputs("w0 w1\n", f);  // missing tab
    std::fclose(f);
  }
  try {
    data::load_corpus(path);
    CHECK(false);
  } catch (const data::CorpusError& e) {
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
  }
  fs::remove_all(dir);
}
