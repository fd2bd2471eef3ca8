#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "natlab/model/nat_model.hpp"

namespace natlab::model {

// Factorized estimate of how likely a proxy input Z is, built from a frozen
// model: position i is masked with probability p_mask(i) (the model's mask
// head on the fully masked input) and otherwise carries an ordinary token
// drawn from the model's own position distribution. Reserved ids other than
// <mask> get probability zero.
class InputPredictor {
 public:
  explicit InputPredictor(const NatModel* frozen) : model_(frozen) {}

  // Per-position log q(z_i | X), natural log; entries may be -inf.
  std::vector<double> logprob(const data::TokenSeq& x, const data::TokenSeq& z) const {
    const Cached& c = lookup(x, static_cast<int>(z.size()));
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::vector<double> out(z.size(), kNegInf);
    for (size_t i = 0; i < z.size(); ++i) {
      if (z[i] == data::kMask) {
        out[i] = c.p_mask[i] > 0.0 ? std::log(c.p_mask[i]) : kNegInf;
      } else if (z[i] >= data::kFirstToken) {
        double p = (1.0 - c.p_mask[i]) * c.dists[i][z[i]];
        out[i] = p > 0.0 ? std::log(p) : kNegInf;
      }  // other reserved ids: impossible under any masking rule
    }
    return out;
  }

 private:
  struct Cached {
    std::vector<double> p_mask;
    std::vector<std::vector<double>> dists;
  };

  const Cached& lookup(const data::TokenSeq& x, int len) const {
    auto key = std::make_pair(x, len);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Cached c;
    c.p_mask = model_->mask_probs(x, len);
    c.dists = model_->position_dists(x, data::TokenSeq(len, data::kMask));
    return cache_.emplace(std::move(key), std::move(c)).first->second;
  }

  const NatModel* model_;
  mutable std::map<std::pair<data::TokenSeq, int>, Cached> cache_;
};

}  // namespace natlab::model
