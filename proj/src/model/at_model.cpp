#include "natlab/model/at_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace natlab::model {

using compute::Graph;

AtModel::AtModel(ModelConfig cfg, uint64_t seed) : cfg_(cfg) {
  util::Rng rng(seed);
  params_.add("embed", {cfg_.vocab, cfg_.d_model}, 0.08, rng);
  register_stack(params_, cfg_, "enc", false, rng);
  register_stack(params_, cfg_, "dec", true, rng);
  register_linear(params_, "out", cfg_.d_model, cfg_.vocab, rng);
  params_.meta["model"] = cfg_.to_meta();
  params_.meta["kind"] = "at";
}

AtModel::AtModel(ParamStore store)
    : cfg_(ModelConfig::from_meta(store.meta.at("model"))), params_(std::move(store)) {
  if (params_.meta.at("kind") != "at")
    throw std::runtime_error("checkpoint is not an autoregressive model");
}

Graph::Ref AtModel::decode_logp(Graph& g, const data::TokenSeq& x,
                                const data::TokenSeq& dec_input, bool frozen) const {
  Trunk trunk(g, params_, cfg_, frozen);
  Graph::Ref enc = trunk.encode(x);
  int len = static_cast<int>(dec_input.size());
  Graph::Ref emb = g.add(trunk.token_embed("embed", dec_input), trunk.posenc(len));
  Graph::Ref h = trunk.stack("dec", emb, trunk.causal_mask(len), enc);
  return g.log_softmax(trunk.linear("out", h));
}

AtModel::TokenLogProb AtModel::logprob(const data::TokenSeq& x,
                                       const data::TokenSeq& y) const {
  if (y.empty()) return {};
  Graph g;
  data::TokenSeq dec_input;
  dec_input.push_back(data::kBos);
  dec_input.insert(dec_input.end(), y.begin(), y.end() - 1);
  Graph::Ref logp = decode_logp(g, x, dec_input, /*frozen=*/true);
  TokenLogProb out;
  for (size_t i = 0; i < y.size(); ++i) {
    double lp = g.value(logp).at(static_cast<int>(i), y[i]);
    out.per_token.push_back(lp);
    out.sum += lp;
  }
  return out;
}

std::vector<double> AtModel::next_token_dist(const data::TokenSeq& x,
                                             const data::TokenSeq& prefix) const {
  Graph g;
  data::TokenSeq dec_input;
  dec_input.push_back(data::kBos);
  dec_input.insert(dec_input.end(), prefix.begin(), prefix.end());
  Graph::Ref logp = decode_logp(g, x, dec_input, /*frozen=*/true);
  int last = static_cast<int>(dec_input.size()) - 1;
  std::vector<double> dist(cfg_.vocab);
  for (int v = 0; v < cfg_.vocab; ++v) dist[v] = std::exp(g.value(logp).at(last, v));
  return dist;
}

Graph::Ref AtModel::build_loss(Graph& g, const data::TokenSeq& x,
                               const data::TokenSeq& y, double label_smoothing) {
  data::TokenSeq dec_input;
  dec_input.push_back(data::kBos);
  dec_input.insert(dec_input.end(), y.begin(), y.end());
  Graph::Ref logp = decode_logp(g, x, dec_input, /*frozen=*/false);
  std::vector<int> targets(y.begin(), y.end());
  targets.push_back(data::kEos);
  std::vector<double> weights(targets.size(), 1.0);
  return g.weighted_nll(logp, std::move(targets), std::move(weights), label_smoothing);
}

BeamHypothesis beam_search(const AtModel& at, const data::TokenSeq& x, int beam_size,
                           double length_penalty, int max_len) {
  if (beam_size < 1) throw std::invalid_argument("beam_size must be positive");
  if (max_len <= 0) max_len = at.cfg().max_len - 1;
  auto lp_norm = [&](double logprob, size_t len) {
    return logprob / std::pow((5.0 + static_cast<double>(len)) / 6.0, length_penalty);
  };

  std::vector<BeamHypothesis> live(1);
  std::vector<BeamHypothesis> finished;
  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<BeamHypothesis> candidates;
    for (const BeamHypothesis& h : live) {
      std::vector<double> dist = at.next_token_dist(x, h.tokens);
      for (int v = 0; v < static_cast<int>(dist.size()); ++v) {
        if (v == data::kPad || v == data::kBos || v == data::kMask) continue;
        BeamHypothesis next = h;
        next.logprob += std::log(std::max(dist[v], 1e-300));
        if (v == data::kEos) {
          next.ended = true;
          next.score = lp_norm(next.logprob, next.tokens.size());
          finished.push_back(std::move(next));
        } else {
          next.tokens.push_back(v);
          candidates.push_back(std::move(next));
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const BeamHypothesis& a, const BeamHypothesis& b) {
                return a.logprob > b.logprob;
              });
    if (static_cast<int>(candidates.size()) > beam_size) candidates.resize(beam_size);
    live = std::move(candidates);
  }
  if (finished.empty()) {
    // ran out of length before any beam emitted EOS
    BeamHypothesis best = live.front();
    for (const BeamHypothesis& h : live)
      if (h.logprob > best.logprob) best = h;
    best.truncated = true;
    best.score = lp_norm(best.logprob, best.tokens.size());
    return best;
  }
  BeamHypothesis best = finished.front();
  for (const BeamHypothesis& h : finished)
    if (h.score > best.score) best = h;
  return best;
}

}  // namespace natlab::model
