#include "natlab/model/transformer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace natlab::model {

using compute::Graph;
using compute::Tensor;

namespace {
constexpr double kInitStd = 0.08;
constexpr double kMaskNegInf = -1e9;
}  // namespace

std::string ModelConfig::to_meta() const {
  std::ostringstream os;
  os << vocab << " " << d_model << " " << n_heads << " " << n_layers << " " << d_ffn
     << " " << max_len << " " << len_offset << " " << (copy_mechanism ? 1 : 0);
  return os.str();
}

ModelConfig ModelConfig::from_meta(const std::string& s) {
  std::istringstream is(s);
  ModelConfig c;
  int copy = 0;
  if (!(is >> c.vocab >> c.d_model >> c.n_heads >> c.n_layers >> c.d_ffn >>
        c.max_len >> c.len_offset >> copy))
    throw std::runtime_error("bad model config meta: " + s);
  c.copy_mechanism = copy != 0;
  return c;
}

void register_linear(ParamStore& ps, const std::string& prefix, int in, int out,
                     util::Rng& rng) {
  ps.add(prefix + ".w", {in, out}, kInitStd, rng);
  ps.add(prefix + ".b", {1, out}, 0.0, rng);
}

namespace {

void register_ln(ParamStore& ps, const std::string& prefix, int d) {
  Tensor gain({1, d});
  gain.fill(1.0);
  ps.add_const(prefix + ".g", std::move(gain));
  ps.add_const(prefix + ".b", Tensor({1, d}));
}

void register_block(ParamStore& ps, const ModelConfig& cfg, const std::string& prefix,
                    bool cross, util::Rng& rng) {
  int d = cfg.d_model;
  register_ln(ps, prefix + ".ln1", d);
  register_linear(ps, prefix + ".attn.q", d, d, rng);
  register_linear(ps, prefix + ".attn.k", d, d, rng);
  register_linear(ps, prefix + ".attn.v", d, d, rng);
  register_linear(ps, prefix + ".attn.o", d, d, rng);
  if (cross) {
    register_ln(ps, prefix + ".lnx", d);
    register_linear(ps, prefix + ".xattn.q", d, d, rng);
    register_linear(ps, prefix + ".xattn.k", d, d, rng);
    register_linear(ps, prefix + ".xattn.v", d, d, rng);
    register_linear(ps, prefix + ".xattn.o", d, d, rng);
  }
  register_ln(ps, prefix + ".ln2", d);
  register_linear(ps, prefix + ".ffn.in", d, cfg.d_ffn, rng);
  register_linear(ps, prefix + ".ffn.out", cfg.d_ffn, d, rng);
}

}  // namespace

void register_stack(ParamStore& ps, const ModelConfig& cfg, const std::string& prefix,
                    bool cross_attention, util::Rng& rng) {
  if (cfg.d_model % cfg.n_heads != 0)
    throw std::invalid_argument("d_model must divide into heads");
  for (int l = 0; l < cfg.n_layers; ++l)
    register_block(ps, cfg, prefix + ".l" + std::to_string(l), cross_attention, rng);
  register_ln(ps, prefix + ".ln_out", cfg.d_model);
}

Graph::Ref Trunk::p(const std::string& name) {
  Param& prm = ps_.at(name);
  if (frozen_) return g_.input(prm.value);
  return g_.param(&prm.value, &prm.grad);
}

Graph::Ref Trunk::token_embed(const std::string& table, const data::TokenSeq& ids) {
  if (static_cast<int>(ids.size()) > cfg_.max_len)
    throw std::invalid_argument("sequence length " + std::to_string(ids.size()) +
                                " exceeds model max_len");
  return g_.scale(g_.rows(p(table), ids), std::sqrt(static_cast<double>(cfg_.d_model)));
}

Graph::Ref Trunk::posenc(int len) const {
  Tensor pe({len, cfg_.d_model});
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < cfg_.d_model; ++j) {
      double angle = i / std::pow(10000.0, 2.0 * (j / 2) / cfg_.d_model);
      pe.at(i, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return g_.input(std::move(pe));
}

Graph::Ref Trunk::causal_mask(int len) const {
  Tensor m({len, len});
  for (int i = 0; i < len; ++i)
    for (int j = i + 1; j < len; ++j) m.at(i, j) = kMaskNegInf;
  return g_.input(std::move(m));
}

Graph::Ref Trunk::norm(const std::string& prefix, Ref x) {
  return g_.layer_norm(x, p(prefix + ".g"), p(prefix + ".b"));
}

Graph::Ref Trunk::linear(const std::string& prefix, Ref x) {
  return g_.add(g_.matmul(x, p(prefix + ".w")), p(prefix + ".b"));
}

Graph::Ref Trunk::mha(const std::string& prefix, Ref q_in, Ref kv_in, Ref mask) {
  Ref q = linear(prefix + ".q", q_in);
  Ref k = linear(prefix + ".k", kv_in);
  Ref v = linear(prefix + ".v", kv_in);
  int hd = cfg_.head_dim();
  double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Ref> heads;
  for (int h = 0; h < cfg_.n_heads; ++h) {
    Ref qh = g_.slice_cols(q, h * hd, hd);
    Ref kh = g_.slice_cols(k, h * hd, hd);
    Ref vh = g_.slice_cols(v, h * hd, hd);
    heads.push_back(g_.attention(qh, kh, vh, mask, scale));
  }
  return linear(prefix + ".o", g_.concat_cols(heads));
}

Graph::Ref Trunk::ffn(const std::string& prefix, Ref x) {
  return linear(prefix + ".ffn.out", g_.relu(linear(prefix + ".ffn.in", x)));
}

Graph::Ref Trunk::stack(const std::string& prefix, Ref x, Ref self_mask, Ref cross_kv) {
  for (int l = 0; l < cfg_.n_layers; ++l) {
    std::string b = prefix + ".l" + std::to_string(l);
    Ref n1 = norm(b + ".ln1", x);
    x = g_.add(x, mha(b + ".attn", n1, n1, self_mask));
    if (cross_kv != Graph::kNoRef)
      x = g_.add(x, mha(b + ".xattn", norm(b + ".lnx", x), cross_kv, Graph::kNoRef));
    x = g_.add(x, ffn(b, norm(b + ".ln2", x)));
  }
  return norm(prefix + ".ln_out", x);
}

Graph::Ref Trunk::encode(const data::TokenSeq& x) {
  Ref emb = g_.add(token_embed("embed", x), posenc(static_cast<int>(x.size())));
  return stack("enc", emb, Graph::kNoRef, Graph::kNoRef);
}

}  // namespace natlab::model
