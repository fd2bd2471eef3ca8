#pragma once

#include <vector>

#include "natlab/data/vocab.hpp"
#include "natlab/model/nat_model.hpp"
#include "natlab/util/rng.hpp"

namespace natlab::proxy {

// Heuristic rule producing a proxy input Z from a proxy target T: keep some
// positions of T and replace the rest with <mask>.
struct MaskRule {
  enum class Kind {
    kVanilla,          // Z = all <mask>
    kCmlmUniform,      // l = max(1, round(lambda L)), lambda ~ U(0,1)
    kCmlmFixed,        // l = ceil(fixed_ratio * L)
    kGlat,             // l = round(lambda(step) * #argmax mismatches)
    kGlatLevenshtein,  // l = round(lambda(step) * edit distance)
    kGlatPref,         // positions kept with weight prop. to P(t_i|X)
    kGlatOneMinusPref  // ... prop. to 1 - P(t_i|X)
  };
  Kind kind = Kind::kVanilla;
  double fixed_ratio = 0.2;
  double lambda_start = 0.5;
  double lambda_end = 0.3;
  int anneal_steps = 1;  // schedule horizon in training steps

  bool needs_snapshot() const { return kind >= Kind::kGlat; }
  double lambda_at(int step) const;
};

struct MaskSample {
  data::TokenSeq Z;
  double log_q = 0.0;  // log probability of Z's mask pattern under the rule
};

// Model-dependent context for the GLAT family; cmlm/vanilla rules ignore it.
struct MaskContext {
  const model::NatModel* snapshot = nullptr;
  const data::TokenSeq* x = nullptr;
  int step = 0;
};

MaskSample vanilla_input(const data::TokenSeq& T);

MaskSample sample_mask_cmlm(const data::TokenSeq& T, const MaskRule& rule,
                            util::Rng& rng);

MaskSample sample_mask_glat(const data::TokenSeq& T, const MaskRule& rule,
                            const MaskContext& ctx, util::Rng& rng);

// Dispatches on the rule kind.
MaskSample sample_mask(const data::TokenSeq& T, const MaskRule& rule,
                       const MaskContext& ctx, util::Rng& rng);

// Exact log probability of Z's mask pattern under the rule; -inf for
// patterns the rule can never produce. For the weighted GLAT variants this
// is the unordered-set probability of the kept positions (summed over all
// draw orders), so the probabilities of all patterns of one length sum to 1.
double mask_pattern_logprob(const MaskRule& rule, const data::TokenSeq& Z,
                            const data::TokenSeq& T, const MaskContext& ctx);

int levenshtein(const data::TokenSeq& a, const data::TokenSeq& b);

}  // namespace natlab::proxy
