#pragma once

#include <vector>

#include "natlab/data/vocab.hpp"
#include "natlab/model/at_model.hpp"
#include "natlab/model/nat_model.hpp"

namespace natlab::proxy {

// Per-position token distributions, each covering the whole vocabulary
// (which includes <eps>).
using Dists = std::vector<std::vector<double>>;

struct AlignResult {
  data::TokenSeq T;     // one token (possibly <eps>) per prediction position
  double cost = 0.0;    // NLL of the alignment incl. skip-penalty terms
  // alignment[i] lists, in order, the reference indices aligned to
  // prediction i; T[i] is the first of them, or <eps> when empty.
  std::vector<std::vector<int>> alignment;
};

inline data::TokenSeq raw_target(const data::TokenSeq& y) { return y; }

// Teacher's beam-search output; on truncation the partial hypothesis is
// returned as-is (the teacher simply never produced EOS).
data::TokenSeq kd_target(const model::AtModel& teacher, const data::TokenSeq& x,
                         int beam = 5);

// Minimal-cost monotonic alignment of the reference onto the prediction
// positions. Transition costs: aligning prediction i to reference token r_j
// costs -log P_i(r_j); leaving prediction i unaligned costs -log P_i(eps);
// aligning a further reference token to an already-aligned prediction costs
// delta * -log P_i(r_j). Probabilities are floored at 1e-30 before logs.
// Ties prefer align, then skip-prediction, then skip-target.
AlignResult axe_align(const Dists& pred_dists, const data::TokenSeq& r, double delta);

// Minimal-cost bijective assignment of reference tokens to prediction
// positions (an L x L assignment problem, solved in O(L^3)); among
// equal-cost assignments the lexicographically smallest (by the reference
// index placed at each prediction, in position order) is returned.
AlignResult oaxe_align(const Dists& pred_dists, const data::TokenSeq& r);

// Solves the assignment problem for an arbitrary square cost matrix;
// returns, for each row, the assigned column. Exposed for tests.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

struct CandidateSet {
  std::vector<data::TokenSeq> targets;      // raw target first, then one per tier
  std::vector<std::vector<double>> bleu;    // bleu[i][j] = S(targets[i], targets[j])
};

CandidateSet make_candidate_set(std::vector<data::TokenSeq> targets);

// Picks T in the candidate set minimizing [per-token NLL under the model
// with a fully masked input] - beta * sum_i gamma_i S(Gamma_i, T).
// First minimizer wins on ties.
data::TokenSeq dynamic_kd_select(const CandidateSet& gamma_set,
                                 const model::NatModel& nat, const data::TokenSeq& x,
                                 double beta, const std::vector<double>& gamma);

// Coordinate grid search for gamma: select T per candidate set by the
// weighted-BLEU criterion alone and minimize the resulting mean
// -beta * BLEU against the multi-references. No model involved.
std::vector<double> tune_gamma(const std::vector<CandidateSet>& dev_sets,
                               const std::vector<std::vector<data::TokenSeq>>& dev_refs,
                               const std::vector<double>& grid, double beta);

}  // namespace natlab::proxy
