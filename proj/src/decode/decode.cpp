#include "natlab/decode/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace natlab::decode {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

struct Candidate {
  data::TokenSeq raw;  // argmax tokens, one per position (may contain <eps>)
  data::TokenSeq z;
  double model_score = 0.0;  // length-normalized sum log P(t_i|Z,X)
  double confidence = 0.0;
};

int argmax_ordinary(const std::vector<double>& dist) {
  int best = data::kFirstToken;
  for (int v = data::kFirstToken; v < static_cast<int>(dist.size()); ++v)
    if (dist[v] > dist[best]) best = v;
  return best;
}

Candidate decode_at_length(const model::NatModel& nat, const model::InputPredictor& ip,
                           const data::TokenSeq& x, int len, Strategy strategy,
                           util::Rng& rng) {
  Candidate c;
  c.z.assign(len, data::kMask);
  if (strategy == Strategy::kInputSampling) {
    std::vector<double> p_mask = nat.mask_probs(x, len);
    auto frozen = nat.position_dists(x, c.z);
    for (int i = 0; i < len; ++i)
      if (!rng.bernoulli(p_mask[i])) c.z[i] = argmax_ordinary(frozen[i]);
  }
  auto dists = nat.position_dists(x, c.z);
  std::vector<double> z_logp = ip.logprob(x, c.z);
  double sum_t = 0.0, sum_z = 0.0;
  for (int i = 0; i < len; ++i) {
    int best = 0;
    for (int v = 1; v < static_cast<int>(dists[i].size()); ++v)
      if (dists[i][v] > dists[i][best]) best = v;
    c.raw.push_back(best);
    sum_t += std::log(std::max(dists[i][best], 1e-300));
    sum_z += std::isinf(z_logp[i]) ? std::log(1e-300) : z_logp[i];
  }
  c.model_score = sum_t / len;
  c.confidence = (sum_t + sum_z) / (2.0 * len) / kLog2;
  return c;
}

data::TokenSeq clean(const data::TokenSeq& raw, bool dedup) {
  data::TokenSeq out;
  for (int t : raw) {
    if (t == data::kEps || t == data::kMask || t == data::kPad) continue;
    if (dedup && !out.empty() && out.back() == t) continue;
    out.push_back(t);
  }
  return out;
}

}  // namespace

int predict_length(const model::NatModel& nat, const data::TokenSeq& x,
                   double length_factor) {
  std::vector<double> dist = nat.length_dist(x);
  int bin = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
  int len = static_cast<int>(x.size()) + bin - nat.cfg().len_offset;
  len = static_cast<int>(std::floor(len * length_factor + 0.5));
  return std::max(len, 0);
}

DecodeResult decode(const model::NatModel& nat, const model::InputPredictor& ip,
                    const data::TokenSeq& x, const DecodeOptions& opts,
                    util::Rng& rng) {
  int len = predict_length(nat, x, opts.length_factor);
  DecodeResult out;
  if (len <= 0) {
    out.empty_flagged = true;
    return out;
  }
  Candidate c = decode_at_length(nat, ip, x, len, opts.strategy, rng);
  out.tokens = clean(c.raw, opts.dedup);
  out.confidence = c.confidence;
  return out;
}

DecodeResult lpd(const model::NatModel& nat, const model::InputPredictor& ip,
                 const data::TokenSeq& x, int n, const DecodeOptions& opts,
                 util::Rng& rng) {
  if (n < 1 || n % 2 == 0) throw std::invalid_argument("lpd: n must be odd and >= 1");
  int center = predict_length(nat, x, opts.length_factor);
  std::vector<int> lengths;
  for (int d = -(n / 2); d <= n / 2; ++d) {
    int len = center + d;
    if (len >= 1 && std::find(lengths.begin(), lengths.end(), len) == lengths.end())
      lengths.push_back(len);
  }
  DecodeResult out;
  if (lengths.empty()) {
    out.empty_flagged = true;
    return out;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (int len : lengths) {
    Candidate c = decode_at_length(nat, ip, x, len, opts.strategy, rng);
    if (c.model_score > best) {
      best = c.model_score;
      out.tokens = clean(c.raw, opts.dedup);
      out.confidence = c.confidence;
    }
  }
  return out;
}

}  // namespace natlab::decode
