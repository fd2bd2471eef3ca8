#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "natlab/decode/decode.hpp"
#include "natlab/model/input_predictor.hpp"
#include "natlab/model/nat_model.hpp"

using namespace natlab;
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

bool clean_tokens(const TokenSeq& t) {
  for (int v : t)
    if (v == data::kMask || v == data::kEps || v == data::kPad) return false;
  return true;
}

}  // namespace

TEST_CASE("default decoding is deterministic and never emits reserved fillers") {
  model::NatModel nat(tiny_cfg(), 11);
  model::InputPredictor ip(&nat);
  TokenSeq x = {5, 7, 9, 6};
  decode::DecodeOptions opts;
  util::Rng r1(3), r2(3);
  decode::DecodeResult a = decode::decode(nat, ip, x, opts, r1);
  decode::DecodeResult b = decode::decode(nat, ip, x, opts, r2);
  CHECK(a.tokens == b.tokens);
  CHECK(a.confidence == b.confidence);
  CHECK(clean_tokens(a.tokens));
  CHECK(std::isfinite(a.confidence));
  CHECK(a.confidence <= 0.0);
}

TEST_CASE("input sampling decoding stays within the ordinary vocabulary") {
  model::NatModel nat(tiny_cfg(true), 12);
  model::InputPredictor ip(&nat);
  TokenSeq x = {6, 8, 10};
  decode::DecodeOptions opts;
  opts.strategy = decode::Strategy::kInputSampling;
  util::Rng rng(9);
  for (int rep = 0; rep < 5; ++rep) {
    decode::DecodeResult r = decode::decode(nat, ip, x, opts, rng);
    CHECK(clean_tokens(r.tokens));
  }
}

TEST_CASE("length factor scales the predicted length with round-half-up") {
  model::NatModel nat(tiny_cfg(), 13);
  TokenSeq x = {5, 6, 7, 8, 9, 10, 5, 6};
  int base = decode::predict_length(nat, x, 1.0);
  CHECK(base >= 0);
  for (double f : {1.05, 1.1, 0.9, 2.0}) {
    int expect = static_cast<int>(std::floor(base * f + 0.5));
    CHECK(decode::predict_length(nat, x, f) == std::max(expect, 0));
  }
  // the canonical example: 20 positions at factor 1.05 become 21
  CHECK(std::floor(20 * 1.05 + 0.5) == 21);
}

TEST_CASE("adjacent de-duplication collapses repeats only next to each other") {
  // exercised through the public API by checking the invariant on outputs
  model::NatModel nat(tiny_cfg(), 14);
  model::InputPredictor ip(&nat);
  decode::DecodeOptions opts;
  opts.dedup = true;
  util::Rng rng(4);
  for (uint64_t s = 0; s < 6; ++s) {
    TokenSeq x = {static_cast<int>(5 + s), 6, 9};
    decode::DecodeResult r = decode::decode(nat, ip, x, opts, rng);
    for (size_t i = 1; i < r.tokens.size(); ++i) CHECK(r.tokens[i] != r.tokens[i - 1]);
  }
}

TEST_CASE("lpd with n=1 equals plain decoding and rejects even n") {
  model::NatModel nat(tiny_cfg(), 15);
  model::InputPredictor ip(&nat);
  TokenSeq x = {7, 5, 9, 11};
  decode::DecodeOptions opts;
  util::Rng r1(2), r2(2);
  decode::DecodeResult one = decode::lpd(nat, ip, x, 1, opts, r1);
  decode::DecodeResult plain = decode::decode(nat, ip, x, opts, r2);
  CHECK(one.tokens == plain.tokens);
  util::Rng r3(2);
  CHECK_THROWS_AS(decode::lpd(nat, ip, x, 2, opts, r3), std::invalid_argument);

  // wider sweeps still return clean token sequences
  for (int n : {3, 5, 7}) {
    util::Rng r(2);
    decode::DecodeResult res = decode::lpd(nat, ip, x, n, opts, r);
    CHECK(clean_tokens(res.tokens));
  }
}
