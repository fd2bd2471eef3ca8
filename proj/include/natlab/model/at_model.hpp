#pragma once

#include <vector>

#include "natlab/model/transformer.hpp"

namespace natlab::model {

// Autoregressive encoder-decoder teacher. The decoder is teacher-forced
// with [BOS, y_1..y_{M-1}] and causally masked.
class AtModel {
 public:
  AtModel(ModelConfig cfg, uint64_t seed);
  explicit AtModel(ParamStore store);  // from checkpoint

  struct TokenLogProb {
    std::vector<double> per_token;  // log P(y_i | y_<i, X), natural log
    double sum = 0.0;
  };
  // Teacher-forced log-probabilities of Y's tokens (no EOS term).
  TokenLogProb logprob(const data::TokenSeq& x, const data::TokenSeq& y) const;

  // Distribution over the next token after the given prefix.
  std::vector<double> next_token_dist(const data::TokenSeq& x,
                                      const data::TokenSeq& prefix) const;

  // Training loss: mean NLL over Y's tokens plus the EOS prediction.
  compute::Graph::Ref build_loss(compute::Graph& g, const data::TokenSeq& x,
                                 const data::TokenSeq& y, double label_smoothing);

  const ModelConfig& cfg() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  compute::Graph::Ref decode_logp(compute::Graph& g, const data::TokenSeq& x,
                                  const data::TokenSeq& dec_input, bool frozen) const;

  ModelConfig cfg_;
  mutable ParamStore params_;  // frozen eval passes do not mutate values
};

struct BeamHypothesis {
  data::TokenSeq tokens;  // without BOS/EOS
  double logprob = 0.0;   // sum of token log-probs incl. EOS when ended
  double score = 0.0;     // length-penalized
  bool ended = false;
  bool truncated = false;  // no EOS within max length
};

// Length-penalized beam search; score = logprob / ((5+len)/6)^alpha.
BeamHypothesis beam_search(const AtModel& at, const data::TokenSeq& x, int beam_size,
                           double length_penalty = 1.0, int max_len = 0);

}  // namespace natlab::model
