#pragma once

#include <vector>

#include "natlab/model/input_predictor.hpp"
#include "natlab/model/nat_model.hpp"
#include "natlab/util/rng.hpp"

namespace natlab::decode {

enum class Strategy { kDefault, kInputSampling };

struct DecodeOptions {
  Strategy strategy = Strategy::kDefault;
  bool dedup = false;          // collapse adjacent repeated tokens
  double length_factor = 1.0;  // scales the predicted length, round-half-up
};

struct DecodeResult {
  data::TokenSeq tokens;       // never contains <mask>, <eps>, <pad>
  bool empty_flagged = false;  // predicted length was zero
  double confidence = 0.0;     // mean per-token log2-prob of the chosen (Z, T)
};

// Most likely target length (argmax of the length head), scaled by the
// length factor and rounded to nearest with ties up.
int predict_length(const model::NatModel& nat, const data::TokenSeq& x,
                   double length_factor = 1.0);

// Default: Z = all <mask>, T = per-position argmax. Input Sampling: per
// position the mask indicator is sampled from the input predictor; unmasked
// positions take the frozen token model's most likely ordinary token.
DecodeResult decode(const model::NatModel& nat, const model::InputPredictor& ip,
                    const data::TokenSeq& x, const DecodeOptions& opts, util::Rng& rng);

// Length-parallel decoding: decode at n lengths centered on the predicted
// one and keep the candidate with the best length-normalized model score.
DecodeResult lpd(const model::NatModel& nat, const model::InputPredictor& ip,
                 const data::TokenSeq& x, int n, const DecodeOptions& opts,
                 util::Rng& rng);

}  // namespace natlab::decode
