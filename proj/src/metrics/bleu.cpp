#include "natlab/metrics/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace natlab::metrics {

namespace {

data::TokenSeq strip_eps(const data::TokenSeq& seq) {
  data::TokenSeq out;
  for (int t : seq)
    if (t != data::kEps) out.push_back(t);
  return out;
}

}  // namespace

double sentence_bleu(const data::TokenSeq& reference, const data::TokenSeq& hypothesis) {
  data::TokenSeq ref = strip_eps(reference);
  data::TokenSeq hyp = strip_eps(hypothesis);
  if (hyp.empty() || ref.empty()) return 0.0;

  double log_prec = 0.0;
  for (int n = 1; n <= 4; ++n) {
    std::map<data::TokenSeq, int> ref_counts;
    for (int i = 0; i + n <= static_cast<int>(ref.size()); ++i)
      ++ref_counts[data::TokenSeq(ref.begin() + i, ref.begin() + i + n)];
    int total = std::max(0, static_cast<int>(hyp.size()) - n + 1);
    int matched = 0;
    std::map<data::TokenSeq, int> used;
    for (int i = 0; i + n <= static_cast<int>(hyp.size()); ++i) {
      data::TokenSeq gram(hyp.begin() + i, hyp.begin() + i + n);
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end() && used[gram] < it->second) {
        ++used[gram];
        ++matched;
      }
    }
    double p = matched > 0 ? static_cast<double>(matched) / total
                           : 0.1 / (total + 0.1);
    log_prec += std::log(p);
  }
  double bp = hyp.size() >= ref.size()
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref.size()) / hyp.size());
  return bp * std::exp(log_prec / 4.0);
}

double l_target_hat(const std::vector<data::TokenSeq>& refs, const data::TokenSeq& T,
                    double beta) {
  if (refs.empty()) throw std::invalid_argument("l_target_hat: no references");
  double mean = 0.0;
  for (const data::TokenSeq& r : refs) mean += sentence_bleu(r, T);
  mean /= refs.size();
  return -beta * mean;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw std::invalid_argument("pearson: need equal lengths >= 3");
  size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace natlab::metrics
