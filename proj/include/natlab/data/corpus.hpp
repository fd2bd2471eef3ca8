#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "natlab/data/vocab.hpp"
#include "natlab/util/rng.hpp"

namespace natlab::data {

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GeneratorSpec {
  enum class Kind { TwoMode, MarkovCorruption };
  Kind kind = Kind::TwoMode;

  // two_mode: each source carries an explicit list of (target, prob) modes.
  struct Mode {
    TokenSeq seq;
    double prob = 0.0;
  };
  std::vector<std::pair<TokenSeq, std::vector<Mode>>> sources;

  // markov_corruption: clean targets from a Markov chain over ordinary
  // token ids, sources derived by replacement then dropping.
  int num_tokens = 0;                       // chain alphabet size
  std::vector<double> init_dist;            // over the alphabet
  std::vector<std::vector<double>> trans;   // row-stochastic
  double replace_rate = 0.0;
  double drop_rate = 0.0;
  int len_min = 0;
  int len_max = 0;

  int vocab_size() const;  // total id count including reserved ids
  void validate() const;
};

// Exactly enumerable conditional P(Y|X), the oracle substrate.
struct EnumerableCond {
  std::map<TokenSeq, std::vector<std::pair<TokenSeq, double>>> by_source;
};

struct ParallelCorpus {
  std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
  std::map<TokenSeq, std::vector<TokenSeq>> refs;
  GeneratorSpec spec;
  uint64_t seed = 0;

  int vocab_size() const { return spec.vocab_size(); }
  bool operator==(const ParallelCorpus& o) const;
};

std::pair<ParallelCorpus, EnumerableCond> gen_two_mode(const GeneratorSpec& spec,
                                                       int n_pairs, uint64_t seed);

ParallelCorpus gen_synthetic(const GeneratorSpec& spec, int n_pairs, uint64_t seed);

// k i.i.d. draws from the true conditional. Under markov_corruption this is
// rejection sampling against the replacement likelihood (capped at 10000
// attempts per draw) and needs the paired target as fallback.
std::vector<TokenSeq> sample_references(const GeneratorSpec& spec, const TokenSeq& X,
                                        int k, uint64_t seed,
                                        const TokenSeq* fallback = nullptr);

// Attach k sampled references for every distinct source in the corpus.
void attach_references(ParallelCorpus& corpus, int k, uint64_t seed);

void save_corpus(const ParallelCorpus& corpus, const std::string& path);
ParallelCorpus load_corpus(const std::string& path);

// Canonical one-source toy: X -> "A B" or "C D", each with probability 1/2.
// Its conditional total correlation is exactly 1 bit per sentence.
GeneratorSpec two_mode_toy_spec();

// Multi-mode corpus generator: each source maps 50/50 to a random sequence
// of `len` distinct ordinary tokens or to its reversal. With distinct tokens
// the two modes disagree at every position, so the conditional total
// correlation is len - 1 bits per sentence.
GeneratorSpec reversal_spec(int n_sources, int len, int alphabet, uint64_t seed);

// Multi-mode corpus generator with monotonic mode structure: each source
// draws len+1 distinct ordinary tokens w and maps 50/50 to the first or the
// last len of them (the two modes are one-position shifts of each other).
// The conditional total correlation is again len - 1 bits per sentence.
GeneratorSpec shift_spec(int n_sources, int len, int alphabet, uint64_t seed);

}  // namespace natlab::data
