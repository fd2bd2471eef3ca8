#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "natlab/compute/graph.hpp"
#include "natlab/model/at_model.hpp"
#include "natlab/model/input_predictor.hpp"
#include "natlab/model/nat_model.hpp"

using namespace natlab;
using compute::Graph;
using data::TokenSeq;

namespace {

model::ModelConfig tiny_cfg(bool copy = false) {
  model::ModelConfig cfg;
  cfg.vocab = 16;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.d_ffn = 32;
  cfg.copy_mechanism = copy;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "natlab_test_ckpt";
  model::AtModel at(tiny_cfg(), 5);
  model::save_checkpoint(at.params(), dir.string());
  model::AtModel back(model::load_checkpoint(dir.string()));
  CHECK(back.params().same_values(at.params()));
  CHECK(back.cfg().d_model == 16);

  // averaging one or k identical checkpoints is the identity
  model::ParamStore avg = model::average_checkpoints({dir.string(), dir.string()});
  CHECK(avg.same_values(at.params()));
  fs::remove_all(dir);
}

TEST_CASE("averaging rejects shape mismatches and averages values") {
  model::AtModel a(tiny_cfg(), 5);
  model::ParamStore zeros, twos;
  for (const model::Param& p : a.params().all()) {
    compute::Tensor z(p.value.shape), t(p.value.shape);
    t.fill(2.0);
    zeros.add_const(p.name, std::move(z));
    twos.add_const(p.name, std::move(t));
  }
  model::ParamStore mean = model::average_stores({&zeros, &twos});
  for (const model::Param& p : mean.all())
    for (double v : p.value.v) CHECK(v == doctest::Approx(1.0));

  model::ParamStore bad;
  bad.add_const("x", compute::Tensor({2, 2}));
  CHECK_THROWS(model::average_stores({&zeros, &bad}));
}

TEST_CASE("AT teacher-forced probabilities normalize and match the loss") {
  model::AtModel at(tiny_cfg(), 7);
  TokenSeq x = {5, 6, 7};
  TokenSeq y = {8, 9};
  model::AtModel::TokenLogProb lp = at.logprob(x, y);
  CHECK(lp.per_token.size() == 2);
  CHECK(lp.sum == doctest::Approx(lp.per_token[0] + lp.per_token[1]));

  // next-token distribution sums to one
  std::vector<double> dist = at.next_token_dist(x, {8});
  CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == doctest::Approx(1.0));
  CHECK(std::log(dist[9]) == doctest::Approx(lp.per_token[1]));

  // loss without smoothing = mean NLL over tokens + EOS
  Graph g;
  Graph::Ref loss = at.build_loss(g, x, y, 0.0);
  TokenSeq with_eos = y;
  double eos_lp = std::log(at.next_token_dist(x, y)[data::kEos]);
  double expect = -(lp.sum + eos_lp) / 3.0;
  CHECK(g.value(loss).v[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("AT loss backward touches every parameter") {
  model::AtModel at(tiny_cfg(), 8);
  Graph g;
  Graph::Ref loss = at.build_loss(g, {5, 6}, {7, 8}, 0.1);
  at.params().zero_grad();
  g.backward(loss);
  int nonzero = 0;
  for (const model::Param& p : at.params().all())
    for (double v : p.grad.v)
      if (v != 0.0) {
        ++nonzero;
        break;
      }
  CHECK(nonzero > static_cast<int>(at.params().all().size()) / 2);
}

TEST_CASE("beam search returns ended-or-truncated hypotheses deterministically") {
  model::AtModel at(tiny_cfg(), 9);
  TokenSeq x = {5, 6, 7, 8};
  model::BeamHypothesis h1 = model::beam_search(at, x, 5);
  model::BeamHypothesis h2 = model::beam_search(at, x, 5);
  CHECK(h1.tokens == h2.tokens);
  CHECK(h1.score == h2.score);
  CHECK((h1.ended || h1.truncated));
  for (int t : h1.tokens) {
    CHECK(t != data::kPad);
    CHECK(t != data::kBos);
    CHECK(t != data::kMask);
    CHECK(t != data::kEos);
  }
  // a wider beam never scores worse than beam 1
  model::BeamHypothesis narrow = model::beam_search(at, x, 1);
  CHECK(h1.score >= narrow.score - 1e-12);
}

TEST_CASE("NAT position distributions normalize; copy mechanism overrides") {
  model::NatModel nat(tiny_cfg(true), 10);
  TokenSeq x = {5, 6, 7};
  TokenSeq z = {data::kMask, 9, data::kMask};
  auto dists = nat.position_dists(x, z);
  REQUIRE(dists.size() == 3);
  for (const auto& d : dists)
    CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0));
  CHECK(dists[1][9] == 1.0);  // unmasked position copied verbatim

  CHECK_THROWS(nat.logprob(x, z, {8, 9}));  // |Z| != |T|
}

TEST_CASE("NAT masked loss equals the rescaled full-sequence mean NLL") {
  model::NatModel nat(tiny_cfg(true), 11);
  TokenSeq x = {5, 6};
  TokenSeq t = {7, 8, 9, 10};
  TokenSeq z = {7, data::kMask, 9, data::kMask};
  Graph g;
  Graph::Ref loss = nat.build_token_loss(g, x, z, t, 0.0);
  // with the copy mechanism, full-sequence NLL = sum over masked positions
  model::NatModel::TokenLogProb lp = nat.logprob(x, z, t);
  double expect = -(lp.per_token[1] + lp.per_token[3]) / 4.0;
  CHECK(g.value(loss).v[0] == doctest::Approx(expect).epsilon(1e-9));
  CHECK(lp.per_token[0] == 0.0);  // copied positions have log-prob 0
}

TEST_CASE("NAT length distribution and auxiliary losses") {
  model::NatModel nat(tiny_cfg(), 12);
  TokenSeq x = {5, 6, 7};
  std::vector<double> ld = nat.length_dist(x);
  CHECK(static_cast<int>(ld.size()) == nat.num_length_bins());
  CHECK(std::accumulate(ld.begin(), ld.end(), 0.0) == doctest::Approx(1.0));

  Graph g;
  Graph::Ref lloss = nat.build_length_loss(g, x, 4);
  CHECK(g.value(lloss).v[0] == doctest::Approx(-std::log(ld[4 - 3 + nat.cfg().len_offset])));

  // mask-head training never moves the trunk (states are detached)
  Graph g2;
  TokenSeq z = {data::kMask, 8, data::kMask};
  Graph::Ref mloss = nat.build_mask_head_loss(g2, x, z);
  nat.params().zero_grad();
  g2.backward(mloss);
  for (const model::Param& p : nat.params().all()) {
    bool is_head = p.name.rfind("mask_head", 0) == 0;
    bool any = false;
    for (double v : p.grad.v) any = any || v != 0.0;
    if (!is_head) CHECK(!any);
  }
}

TEST_CASE("input predictor branches") {
  model::NatModel nat(tiny_cfg(), 13);
  TokenSeq x = {5, 6, 7};
  model::InputPredictor ip(&nat);
  std::vector<double> pm = nat.mask_probs(x, 3);
  auto dists = nat.position_dists(x, {data::kMask, data::kMask, data::kMask});

  std::vector<double> lp = ip.logprob(x, {data::kMask, 9, data::kEps});
  CHECK(lp[0] == doctest::Approx(std::log(pm[0])));
  CHECK(lp[1] == doctest::Approx(std::log((1.0 - pm[1]) * dists[1][9])));
  CHECK(std::isinf(lp[2]));
  CHECK(lp[2] < 0);
}

TEST_CASE("frozen passes leave parameters untouched bit-for-bit") {
  model::NatModel nat(tiny_cfg(), 14);
  model::NatModel copy(tiny_cfg(), 14);
  TokenSeq x = {5, 6, 7, 8};
  nat.position_dists(x, {data::kMask, data::kMask});
  nat.length_dist(x);
  nat.mask_probs(x, 5);
  CHECK(nat.params().same_values(copy.params()));
}
