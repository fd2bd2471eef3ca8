#include "natlab/model/nat_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace natlab::model {

using compute::Graph;

NatModel::NatModel(ModelConfig cfg, uint64_t seed) : cfg_(cfg) {
  util::Rng rng(seed);
  params_.add("embed", {cfg_.vocab, cfg_.d_model}, 0.08, rng);
  register_stack(params_, cfg_, "enc", false, rng);
  register_stack(params_, cfg_, "dec", true, rng);
  register_linear(params_, "out", cfg_.d_model, cfg_.vocab, rng);
  register_linear(params_, "len", cfg_.d_model, num_length_bins(), rng);
  register_linear(params_, "mask_head", cfg_.d_model, 2, rng);
  params_.meta["model"] = cfg_.to_meta();
  params_.meta["kind"] = "nat";
}

NatModel::NatModel(ParamStore store)
    : cfg_(ModelConfig::from_meta(store.meta.at("model"))), params_(std::move(store)) {
  if (params_.meta.at("kind") != "nat")
    throw std::runtime_error("checkpoint is not a non-autoregressive model");
}

Graph::Ref NatModel::decode_states(Graph& g, const data::TokenSeq& x,
                                   const data::TokenSeq& z, bool frozen) const {
  if (z.empty()) throw std::invalid_argument("empty decoder input");
  Trunk trunk(g, params_, cfg_, frozen);
  Graph::Ref enc = trunk.encode(x);
  int n = static_cast<int>(x.size());
  int m = static_cast<int>(z.size());
  std::vector<int> copy_ids(m);
  for (int i = 0; i < m; ++i) copy_ids[i] = i * n / m;
  Graph::Ref emb = g.add(g.add(trunk.token_embed("embed", z), g.rows(enc, copy_ids)),
                         trunk.posenc(m));
  return trunk.stack("dec", emb, Graph::kNoRef, enc);
}

std::vector<std::vector<double>> NatModel::position_dists(
    const data::TokenSeq& x, const data::TokenSeq& z) const {
  Graph g;
  Trunk trunk(g, params_, cfg_, /*frozen=*/true);
  Graph::Ref h = decode_states(g, x, z, /*frozen=*/true);
  Graph::Ref logp = g.log_softmax(trunk.linear("out", h));
  std::vector<std::vector<double>> dists(z.size(), std::vector<double>(cfg_.vocab));
  for (size_t i = 0; i < z.size(); ++i) {
    if (cfg_.copy_mechanism && z[i] != data::kMask) {
      dists[i][z[i]] = 1.0;
      continue;
    }
    for (int v = 0; v < cfg_.vocab; ++v)
      dists[i][v] = std::exp(g.value(logp).at(static_cast<int>(i), v));
  }
  return dists;
}

NatModel::TokenLogProb NatModel::logprob(const data::TokenSeq& x,
                                         const data::TokenSeq& z,
                                         const data::TokenSeq& t) const {
  if (z.size() != t.size())
    throw std::invalid_argument("decoder input and target lengths differ");
  std::vector<std::vector<double>> dists = position_dists(x, z);
  TokenLogProb out;
  for (size_t i = 0; i < t.size(); ++i) {
    double p = dists[i][t[i]];
    double lp = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    out.per_token.push_back(lp);
    out.sum += lp;
  }
  return out;
}

std::vector<double> NatModel::length_dist(const data::TokenSeq& x) const {
  Graph g;
  Trunk trunk(g, params_, cfg_, /*frozen=*/true);
  Graph::Ref pooled = g.mean_rows(trunk.encode(x));
  Graph::Ref logp = g.log_softmax(trunk.linear("len", pooled));
  std::vector<double> dist(num_length_bins());
  for (int k = 0; k < num_length_bins(); ++k) dist[k] = std::exp(g.value(logp).at(0, k));
  return dist;
}

std::vector<double> NatModel::mask_probs(const data::TokenSeq& x, int len) const {
  Graph g;
  Trunk trunk(g, params_, cfg_, /*frozen=*/true);
  data::TokenSeq z(len, data::kMask);
  Graph::Ref h = decode_states(g, x, z, /*frozen=*/true);
  Graph::Ref logp = g.log_softmax(trunk.linear("mask_head", h));
  std::vector<double> probs(len);
  for (int i = 0; i < len; ++i) probs[i] = std::exp(g.value(logp).at(i, 1));
  return probs;
}

Graph::Ref NatModel::build_token_loss(Graph& g, const data::TokenSeq& x,
                                      const data::TokenSeq& z, const data::TokenSeq& t,
                                      double label_smoothing) {
  if (z.size() != t.size())
    throw std::invalid_argument("decoder input and target lengths differ");
  Trunk trunk(g, params_, cfg_, /*frozen=*/false);
  Graph::Ref h = decode_states(g, x, z, /*frozen=*/false);
  Graph::Ref logp = g.log_softmax(trunk.linear("out", h));
  std::vector<int> targets(t.begin(), t.end());
  std::vector<double> weights(t.size(), 1.0);
  if (cfg_.copy_mechanism) {
    double wsum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
      weights[i] = (z[i] == data::kMask) ? 1.0 : 0.0;
      wsum += weights[i];
    }
    if (wsum == 0.0) return g.input(compute::Tensor({1}));  // nothing masked
    // unmasked positions are copied with probability one, so the full-
    // sequence mean NLL is the masked mean scaled by the masked fraction
    Graph::Ref nll = g.weighted_nll(logp, std::move(targets), std::move(weights),
                                    label_smoothing);
    return g.scale(nll, wsum / static_cast<double>(t.size()));
  }
  return g.weighted_nll(logp, std::move(targets), std::move(weights), label_smoothing);
}

Graph::Ref NatModel::build_length_loss(Graph& g, const data::TokenSeq& x,
                                       int target_len) {
  Trunk trunk(g, params_, cfg_, /*frozen=*/false);
  Graph::Ref pooled = g.mean_rows(trunk.encode(x));
  Graph::Ref logp = g.log_softmax(trunk.linear("len", pooled));
  int bin = target_len - static_cast<int>(x.size()) + cfg_.len_offset;
  bin = std::clamp(bin, 0, num_length_bins() - 1);
  return g.weighted_nll(logp, {bin}, {1.0});
}

Graph::Ref NatModel::build_mask_head_loss(Graph& g, const data::TokenSeq& x,
                                          const data::TokenSeq& z) {
  Trunk trunk(g, params_, cfg_, /*frozen=*/false);
  // The head is queried on the fully masked input (the pattern itself is
  // what it predicts), so train it on those states, not on z's states.
  data::TokenSeq all_mask(z.size(), data::kMask);
  Graph::Ref h = g.detach(decode_states(g, x, all_mask, /*frozen=*/false));
  Graph::Ref logp = g.log_softmax(trunk.linear("mask_head", h));
  std::vector<int> targets(z.size());
  for (size_t i = 0; i < z.size(); ++i) targets[i] = (z[i] == data::kMask) ? 1 : 0;
  std::vector<double> weights(z.size(), 1.0);
  return g.weighted_nll(logp, std::move(targets), std::move(weights));
}

}  // namespace natlab::model
