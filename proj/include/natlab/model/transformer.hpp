#pragma once

#include <string>
#include <vector>

#include "natlab/compute/graph.hpp"
#include "natlab/data/vocab.hpp"
#include "natlab/model/params.hpp"

namespace natlab::model {

struct ModelConfig {
  int vocab = 0;
  int d_model = 32;
  int n_heads = 2;
  int n_layers = 1;
  int d_ffn = 64;
  int max_len = 40;
  int len_offset = 8;  // length predictor covers |X| +/- len_offset
  bool copy_mechanism = false;

  int head_dim() const { return d_model / n_heads; }
  std::string to_meta() const;
  static ModelConfig from_meta(const std::string& s);
};

// Creates every parameter of a pre-LN transformer stack under `prefix`
// ("enc" gets self-attention only, "dec" additionally cross-attention).
void register_stack(ParamStore& ps, const ModelConfig& cfg, const std::string& prefix,
                    bool cross_attention, util::Rng& rng);

// Builds the forward pass over an existing graph. When frozen, parameters
// enter the graph as plain inputs and receive no gradient.
class Trunk {
 public:
  using Ref = compute::Graph::Ref;

  Trunk(compute::Graph& g, ParamStore& ps, const ModelConfig& cfg, bool frozen)
      : g_(g), ps_(ps), cfg_(cfg), frozen_(frozen) {}

  Ref p(const std::string& name);

  Ref token_embed(const std::string& table, const data::TokenSeq& ids);
  Ref posenc(int len) const;       // fixed sinusoidal table as an input node
  Ref causal_mask(int len) const;  // additive mask input

  Ref stack(const std::string& prefix, Ref x, Ref self_mask, Ref cross_kv);
  Ref encode(const data::TokenSeq& x);                      // "enc" stack
  Ref linear(const std::string& prefix, Ref x);             // x W + b

  compute::Graph& graph() { return g_; }
  const ModelConfig& cfg() const { return cfg_; }

 private:
  Ref mha(const std::string& prefix, Ref q_in, Ref kv_in, Ref mask);
  Ref ffn(const std::string& prefix, Ref x);
  Ref norm(const std::string& prefix, Ref x);

  compute::Graph& g_;
  ParamStore& ps_;
  const ModelConfig& cfg_;
  bool frozen_;
};

void register_linear(ParamStore& ps, const std::string& prefix, int in, int out,
                     util::Rng& rng);

}  // namespace natlab::model
