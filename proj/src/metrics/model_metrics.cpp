#include "natlab/metrics/model_metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace natlab::metrics {

namespace {
constexpr double kLog2 = 0.69314718055994530942;
}

double l_nat(const model::NatModel& nat, const std::vector<ProxiedPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("l_nat: no proxied pairs");
  double total = 0.0;
  long tokens = 0;
  for (const ProxiedPair& p : pairs) {
    if (p.t.empty() || p.z.size() != p.t.size())
      throw std::invalid_argument("l_nat: pair without well-formed proxies");
    total -= nat.logprob(p.x, p.z, p.t).sum;
    tokens += static_cast<long>(p.t.size());
  }
  return total / static_cast<double>(tokens) / kLog2;
}

LInputResult l_input(const model::InputPredictor& ip, const proxy::MaskRule& rule,
                     const std::vector<std::pair<data::TokenSeq, data::TokenSeq>>& xt,
                     const model::NatModel* snapshot, int step, int samples,
                     util::Rng& rng, double cap_bits_per_token) {
  if (xt.empty() || samples < 1) throw std::invalid_argument("l_input: nothing to do");
  LInputResult out;
  double total = 0.0;
  long tokens = 0;
  for (const auto& [x, t] : xt) {
    proxy::MaskContext ctx{snapshot, &x, step};
    for (int s = 0; s < samples; ++s) {
      proxy::MaskSample ms = proxy::sample_mask(t, rule, ctx, rng);
      std::vector<double> lp = ip.logprob(x, ms.Z);
      double log_p = 0.0;
      bool flagged = false;
      for (double v : lp) {
        if (std::isinf(v)) {
          flagged = true;
          break;
        }
        log_p += v;
      }
      double len = static_cast<double>(t.size());
      double bits = flagged ? cap_bits_per_token * len
                            : (ms.log_q - log_p) / kLog2;
      if (flagged) ++out.flagged;
      total += bits;
      tokens += static_cast<long>(t.size());
    }
  }
  out.bits_per_token = total / static_cast<double>(tokens);
  return out;
}

}  // namespace natlab::metrics
