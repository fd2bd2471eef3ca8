#pragma once

#include <vector>

#include "natlab/data/vocab.hpp"

namespace natlab::metrics {

// Smoothed sentence BLEU in [0,1]: geometric mean of n-gram precisions
// (n=1..4) times the brevity penalty. A zero match count m_n is smoothed to
// (m_n + 0.1) / (c_n + 0.1); EPS tokens are stripped from both sides first.
double sentence_bleu(const data::TokenSeq& reference, const data::TokenSeq& hypothesis);

// Mean of -beta * sentence_bleu(ref, T) over the references.
double l_target_hat(const std::vector<data::TokenSeq>& refs, const data::TokenSeq& T,
                    double beta);

// Pearson correlation coefficient; throws on zero variance or size < 3.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace natlab::metrics
