#pragma once

#include <vector>

#include "natlab/model/input_predictor.hpp"
#include "natlab/model/nat_model.hpp"
#include "natlab/proxy/input.hpp"

namespace natlab::metrics {

// One corpus pair with its proxies attached by the E-step.
struct ProxiedPair {
  data::TokenSeq x;
  data::TokenSeq t;  // proxy target (may contain <eps>)
  data::TokenSeq z;  // proxy input
};

// Mean -log2 P(t_i | Z, X) over all pairs and positions; <eps> is an
// ordinary token here.
double l_nat(const model::NatModel& nat, const std::vector<ProxiedPair>& pairs);

struct LInputResult {
  double bits_per_token = 0.0;
  int flagged = 0;  // samples that hit a -inf predictor branch and were capped
};

// Monte-Carlo KL[Q(Z|T,X) || P(Z|X)] per token in bits: for each pair, draw
// `samples` proxy inputs from the rule and average
// log Q(Z|T,X) - log P(Z|X). Samples with an impossible-under-the-predictor
// position are capped at `cap_bits_per_token`.
LInputResult l_input(const model::InputPredictor& ip, const proxy::MaskRule& rule,
                     const std::vector<std::pair<data::TokenSeq, data::TokenSeq>>& xt,
                     const model::NatModel* snapshot, int step, int samples,
                     util::Rng& rng, double cap_bits_per_token = 30.0);

}  // namespace natlab::metrics
