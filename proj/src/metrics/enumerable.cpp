#include "natlab/metrics/enumerable.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "natlab/metrics/bleu.hpp"

namespace natlab::metrics {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

double entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h / kLog2;
}

}  // namespace

TcResult exact_tc(const data::EnumerableCond& cond) {
  if (cond.by_source.empty()) throw std::invalid_argument("exact_tc: empty conditional");
  double sum_c = 0.0;
  double sum_len = 0.0;
  for (const auto& [src, dist] : cond.by_source) {
    if (dist.empty()) throw std::invalid_argument("exact_tc: empty support");
    if (dist.size() > 1000000)
      throw std::invalid_argument("exact_tc: support too large");
    size_t len = dist[0].first.size();
    for (const auto& [seq, p] : dist)
      if (seq.size() != len)
        throw std::invalid_argument("exact_tc: mixed lengths in one source's support");
    // joint entropy
    std::vector<double> joint;
    for (const auto& [seq, p] : dist) joint.push_back(p);
    double h_joint = entropy_bits(joint);
    // positional marginals
    double h_marg = 0.0;
    for (size_t i = 0; i < len; ++i) {
      std::map<int, double> marg;
      for (const auto& [seq, p] : dist) marg[seq[i]] += p;
      std::vector<double> m;
      for (const auto& [tok, p] : marg) m.push_back(p);
      h_marg += entropy_bits(m);
    }
    sum_c += h_marg - h_joint;
    sum_len += static_cast<double>(len);
  }
  double n = static_cast<double>(cond.by_source.size());
  TcResult r;
  r.bits_per_sentence = sum_c / n;
  r.bits_per_token = sum_c / sum_len;
  return r;
}

double exact_kl(const std::vector<std::pair<data::TokenSeq, double>>& dist,
                const std::vector<std::vector<double>>& pos_dists) {
  double kl = 0.0;
  for (const auto& [seq, p] : dist) {
    if (p <= 0.0) continue;
    if (seq.size() != pos_dists.size())
      throw std::invalid_argument("exact_kl: model length != support length");
    double logq = 0.0;
    bool zero = false;
    for (size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] < 0 || seq[i] >= static_cast<int>(pos_dists[i].size()))
        throw std::invalid_argument("exact_kl: token id outside model vocabulary");
      double q = pos_dists[i][seq[i]];
      if (q <= 0.0) {
        zero = true;
        break;
      }
      logq += std::log(q);
    }
    if (zero) return std::numeric_limits<double>::infinity();
    kl += p * (std::log(p) - logq);
  }
  return kl / kLog2;
}

MpleTerms exact_mple_terms(
    const std::vector<std::pair<data::TokenSeq, double>>& p_data,
    const EnumerableQ& q,
    const std::function<double(const data::TokenSeq&, const data::TokenSeq&)>& decoder_prob,
    const std::function<double(const data::TokenSeq&)>& input_prob,
    double beta, const std::vector<data::TokenSeq>& y_universe,
    const std::vector<std::pair<data::TokenSeq, data::TokenSeq>>& tz_universe) {
  if (q.entries.empty()) throw std::invalid_argument("exact_mple_terms: empty Q");

  // Paraphraser normalizer zeta(T) over the enumerated Y universe.
  auto zeta = [&](const data::TokenSeq& T) {
    double z = 0.0;
    for (const data::TokenSeq& Y : y_universe) z += std::exp(beta * sentence_bleu(Y, T));
    return z;
  };
  auto paraphraser = [&](const data::TokenSeq& Y, const data::TokenSeq& T) {
    return std::exp(beta * sentence_bleu(Y, T)) / zeta(T);
  };

  // Marginals of Q.
  std::map<data::TokenSeq, double> q_z, q_t;
  for (const auto& e : q.entries) {
    q_z[e.Z] += e.prob;
    q_t[e.T] += e.prob;
  }

  MpleTerms out;

  // L_NAT = sum_Z Q(Z) sum_T Q(T|Z) log(Q(T|Z) / dec(T,Z))
  for (const auto& e : q.entries) {
    if (e.prob <= 0.0) continue;
    double qtz = e.prob / q_z[e.Z];
    out.l_nat += e.prob * std::log(qtz / decoder_prob(e.T, e.Z));
  }

  // L_target = -sum_Y Pd(Y) sum_T Q(T) log P(Y|T)
  for (const auto& [Y, py] : p_data)
    for (const auto& [T, qt] : q_t)
      out.l_target -= py * qt * std::log(paraphraser(Y, T));

  // L_input = sum_Z Q(Z) log(Q(Z) / inp(Z))
  for (const auto& [Z, qz] : q_z)
    if (qz > 0.0) out.l_input += qz * std::log(qz / input_prob(Z));

  out.l_nat /= kLog2;
  out.l_target /= kLog2;
  out.l_input /= kLog2;
  out.l_mple = out.l_nat + out.l_target + out.l_input;

  // Direct route: one expectation over the full integrand.
  double direct = 0.0;
  for (const auto& [Y, py] : p_data) {
    for (const auto& e : q.entries) {
      if (e.prob <= 0.0) continue;
      double qtz = e.prob / q_z[e.Z];
      double integrand = std::log(paraphraser(Y, e.T)) +
                         std::log(decoder_prob(e.T, e.Z) / qtz) +
                         std::log(input_prob(e.Z) / q_z[e.Z]);
      direct -= py * e.prob * integrand;
    }
  }
  out.l_mple_direct = direct / kLog2;

  // Exact NLL of the latent-variable model, Y marginalized over tz_universe.
  double nll = 0.0;
  for (const auto& [Y, py] : p_data) {
    double p = 0.0;
    for (const auto& [T, Z] : tz_universe)
      p += paraphraser(Y, T) * decoder_prob(T, Z) * input_prob(Z);
    nll -= py * std::log(p);
  }
  out.exact_nll = nll / kLog2;
  return out;
}

}  // namespace natlab::metrics
