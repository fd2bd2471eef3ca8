#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "natlab/data/corpus.hpp"

namespace natlab::metrics {

struct TcResult {
  double bits_per_sentence = 0.0;
  double bits_per_token = 0.0;
};

// Conditional total correlation sum_i H(y_i|X) - H(Y|X), exact by full
// enumeration, averaged uniformly over sources. All sequences within one
// source's support must share a length.
TcResult exact_tc(const data::EnumerableCond& cond);

// Exact KL[P_data(Y|X) || prod_i pos_dists[i][y_i]] in bits for one source.
// Returns +inf when the model assigns zero to a support point.
double exact_kl(const std::vector<std::pair<data::TokenSeq, double>>& dist,
                const std::vector<std::vector<double>>& pos_dists);

// Explicit variational distribution Q(T, Z|X).
struct EnumerableQ {
  struct Entry {
    data::TokenSeq T;
    data::TokenSeq Z;
    double prob = 0.0;
  };
  std::vector<Entry> entries;
};

struct MpleTerms {
  double l_nat = 0.0;      // E_{Q(Z)} KL[Q(T|Z) || P(T|Z,X)]
  double l_target = 0.0;   // E_{P_data} E_{Q(T)} [-log P(Y|T)]
  double l_input = 0.0;    // KL[Q(Z) || P(Z|X)]
  double l_mple = 0.0;     // sum of the three (decomposed route)
  double l_mple_direct = 0.0;  // single-expectation route over the integrand
  double exact_nll = 0.0;  // -E_{P_data} log sum_{T,Z} P(Y|T) P(T|Z,X) P(Z|X)
};

// All expectations by exact enumeration, reported in bits. decoder_prob and
// input_prob must be normalized over tz_universe's T and Z components; the
// paraphraser P(Y|T) = exp(beta * BLEU(Y,T)) / zeta is normalized over
// y_universe exactly.
MpleTerms exact_mple_terms(
    const std::vector<std::pair<data::TokenSeq, double>>& p_data,
    const EnumerableQ& q,
    const std::function<double(const data::TokenSeq&, const data::TokenSeq&)>& decoder_prob,
    const std::function<double(const data::TokenSeq&)>& input_prob,
    double beta, const std::vector<data::TokenSeq>& y_universe,
    const std::vector<std::pair<data::TokenSeq, data::TokenSeq>>& tz_universe);

}  // namespace natlab::metrics
