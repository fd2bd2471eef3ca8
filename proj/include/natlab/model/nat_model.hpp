#pragma once

#include <vector>

#include "natlab/model/transformer.hpp"

namespace natlab::model {

// Non-autoregressive encoder-decoder. The decoder attends without a causal
// mask; its input at position i is embed(z_i) + enc_state[floor(i*N/M)] +
// posenc(i) ("uniform copy"). Every target position is predicted in one pass.
//
// Besides the token head the model carries two small auxiliary heads:
//  - a length head over offsets |X| - len_offset .. |X| + len_offset,
//  - a mask head predicting, per position, the probability that the decoder
//    input at that position was masked (trained on detached states).
class NatModel {
 public:
  NatModel(ModelConfig cfg, uint64_t seed);
  explicit NatModel(ParamStore store);  // from checkpoint

  // Per-position token distributions given decoder input Z (|Z| positions).
  // With the copy mechanism enabled, an unmasked position z_i != <mask>
  // yields the one-point distribution at z_i.
  std::vector<std::vector<double>> position_dists(const data::TokenSeq& x,
                                                  const data::TokenSeq& z) const;

  struct TokenLogProb {
    std::vector<double> per_token;  // log P_i(t_i | X, Z), natural log
    double sum = 0.0;
  };
  TokenLogProb logprob(const data::TokenSeq& x, const data::TokenSeq& z,
                       const data::TokenSeq& t) const;

  // Length distribution; entry k is the probability of target length
  // |X| + k - len_offset. Entries for lengths < 1 are produced as-is and
  // must be handled by the caller.
  std::vector<double> length_dist(const data::TokenSeq& x) const;
  int num_length_bins() const { return 2 * cfg_.len_offset + 1; }

  // Per-position masking probability under the mask head, evaluated on the
  // fully masked decoder input of the given length.
  std::vector<double> mask_probs(const data::TokenSeq& x, int len) const;

  // Token loss. With the copy mechanism, only masked positions contribute
  // and the mean is rescaled so the node equals the full-sequence mean NLL.
  compute::Graph::Ref build_token_loss(compute::Graph& g, const data::TokenSeq& x,
                                       const data::TokenSeq& z, const data::TokenSeq& t,
                                       double label_smoothing);
  // NLL of the target length bin (caller applies its weight).
  compute::Graph::Ref build_length_loss(compute::Graph& g, const data::TokenSeq& x,
                                        int target_len);
  // Binary NLL of the mask pattern of Z under the mask head; the trunk
  // states are detached so this head never steers the main model.
  compute::Graph::Ref build_mask_head_loss(compute::Graph& g, const data::TokenSeq& x,
                                           const data::TokenSeq& z);

  const ModelConfig& cfg() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  compute::Graph::Ref decode_states(compute::Graph& g, const data::TokenSeq& x,
                                    const data::TokenSeq& z, bool frozen) const;

  ModelConfig cfg_;
  mutable ParamStore params_;
};

}  // namespace natlab::model
