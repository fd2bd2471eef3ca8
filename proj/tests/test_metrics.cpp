#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "natlab/metrics/bleu.hpp"
#include "natlab/metrics/enumerable.hpp"
#include "natlab/util/rng.hpp"

using namespace natlab;
using data::TokenSeq;

namespace {
constexpr int kA = data::kFirstToken;
constexpr int kB = kA + 1;
constexpr int kC = kA + 2;
constexpr int kD = kA + 3;
constexpr int kE = kA + 4;
}  // namespace

TEST_CASE("sentence_bleu basics") {
  TokenSeq y = {kA, kB, kC, kD};
  CHECK(metrics::sentence_bleu(y, y) == doctest::Approx(1.0));
  // disjoint sequences sit at the smoothing floor, which shrinks with length
  CHECK(metrics::sentence_bleu({kA, kB, kC, kD}, {kE, kE + 1, kE + 2, kE + 3}) < 0.05);
  TokenSeq long_ref, long_hyp;
  for (int i = 0; i < 20; ++i) {
    long_ref.push_back(kA + i);
    long_hyp.push_back(kA + 20 + i);
  }
  CHECK(metrics::sentence_bleu(long_ref, long_hyp) < 0.01);
  CHECK(metrics::sentence_bleu(y, {}) == 0.0);
}

TEST_CASE("sentence_bleu hand-counted example") {
  // Y = [a,b,c,d], T = [a,b,c,e]
  //   p1: unigrams a,b,c,e -> 3 match of 4
  //   p2: bigrams ab,bc,ce -> 2 match of 3
  //   p3: trigrams abc,bce -> 1 match of 2
  //   p4: the single 4-gram misses -> smoothed 0.1/1.1
  //   BP = 1, BLEU = (3/4 * 2/3 * 1/2 * 1/11)^(1/4) = (1/44)^(1/4)
  double expected = std::pow(1.0 / 44.0, 0.25);
  CHECK(metrics::sentence_bleu({kA, kB, kC, kD}, {kA, kB, kC, kE}) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.3882).epsilon(1e-3));
}

TEST_CASE("sentence_bleu strips eps and applies brevity penalty") {
  TokenSeq ref = {kA, kB, kC, kD};
  TokenSeq hyp_padded = {kA, data::kEps, kB, kC, data::kEps, kD};
  CHECK(metrics::sentence_bleu(ref, hyp_padded) == doctest::Approx(1.0));
  // short hypothesis: clipped precisions perfect, BP = exp(1 - 4/3)
  TokenSeq hyp_short = {kA, kB, kC};
  double bp = std::exp(1.0 - 4.0 / 3.0);
  double p4 = 0.1 / 0.1;  // no 4-grams in a 3-token hypothesis
  (void)p4;
  CHECK(metrics::sentence_bleu(ref, hyp_short) == doctest::Approx(bp).epsilon(1e-9));
}

TEST_CASE("sentence_bleu clips repeated n-grams") {
  // hypothesis repeats "a" beyond the reference count
  TokenSeq ref = {kA, kB};
  TokenSeq hyp = {kA, kA};
  // p1 = 1/2 (second "a" clipped); p2 = 0 -> 0.1/1.1; 3/4-grams vacuous -> 1
  double expected = std::pow(0.5 * (0.1 / 1.1) * 1.0 * 1.0, 0.25);
  CHECK(metrics::sentence_bleu(ref, hyp) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("l_target_hat") {
  TokenSeq t = {kA, kB, kC};
  CHECK(metrics::l_target_hat({t}, t, 0.2) == doctest::Approx(-0.2));
  CHECK(metrics::l_target_hat({t, {kD, kE}}, t, 0.0) == 0.0);
  CHECK_THROWS(metrics::l_target_hat({}, t, 0.2));
}

TEST_CASE("pearson") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  CHECK(metrics::pearson(x, y) == doctest::Approx(1.0));
  for (double& v : y) v = -v;
  CHECK(metrics::pearson(x, y) == doctest::Approx(-1.0));
  CHECK_THROWS(metrics::pearson({1, 1, 1}, {1, 2, 3}));
  CHECK_THROWS(metrics::pearson({1, 2}, {1, 2}));

  util::Rng rng(7);
  std::vector<double> u, v;
  for (int i = 0; i < 1000; ++i) {
    u.push_back(rng.uniform());
    v.push_back(rng.uniform());
  }
  CHECK(std::fabs(metrics::pearson(u, v)) < 0.1);
}

TEST_CASE("exact_tc on hand-enumerable conditionals") {
  data::EnumerableCond one_point;
  one_point.by_source[{kA}] = {{{kB, kC}, 1.0}};
  CHECK(metrics::exact_tc(one_point).bits_per_sentence == doctest::Approx(0.0));

  data::EnumerableCond two_mode;
  two_mode.by_source[{kA}] = {{{kA, kB}, 0.5}, {{kC, kD}, 0.5}};
  metrics::TcResult r = metrics::exact_tc(two_mode);
  CHECK(r.bits_per_sentence == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.bits_per_token == doctest::Approx(0.5).epsilon(1e-12));

  // product distribution: tokens independent given X -> C = 0
  data::EnumerableCond prod;
  prod.by_source[{kA}] = {{{kA, kA}, 0.25}, {{kA, kB}, 0.25},
                          {{kB, kA}, 0.25}, {{kB, kB}, 0.25}};
  CHECK(metrics::exact_tc(prod).bits_per_sentence == doctest::Approx(0.0));
}

TEST_CASE("exact_kl equality at matched marginals and +inf on missing support") {
  std::vector<std::pair<TokenSeq, double>> dist = {{{kA, kB}, 0.5}, {{kC, kD}, 0.5}};
  // product model with the data's positional marginals
  std::vector<std::vector<double>> pos(2, std::vector<double>(kE + 1, 0.0));
  pos[0][kA] = 0.5;
  pos[0][kC] = 0.5;
  pos[1][kB] = 0.5;
  pos[1][kD] = 0.5;
  CHECK(metrics::exact_kl(dist, pos) == doctest::Approx(1.0).epsilon(1e-12));

  pos[1][kD] = 0.0;
  pos[1][kB] = 1.0;
  CHECK(std::isinf(metrics::exact_kl(dist, pos)));

  std::vector<std::pair<TokenSeq, double>> point = {{{kA}, 1.0}};
  std::vector<std::vector<double>> exact(1, std::vector<double>(kA + 1, 0.0));
  exact[0][kA] = 1.0;
  CHECK(metrics::exact_kl(point, exact) == doctest::Approx(0.0));
}

TEST_CASE("conditional total correlation lower-bounds the KL of product models") {
  util::Rng rng(99);
  for (int toy = 0; toy < 10; ++toy) {
    int len = rng.uniform_int(1, 3);
    int vocab = rng.uniform_int(2, 8);
    int support = rng.uniform_int(2, 6);
    std::map<TokenSeq, double> dist_map;
    double total = 0.0;
    for (int s = 0; s < support; ++s) {
      TokenSeq seq(len);
      for (int& t : seq) t = kA + rng.uniform_int(0, vocab - 1);
      double w = rng.uniform() + 1e-3;
      dist_map[seq] += w;
      total += w;
    }
    std::vector<std::pair<TokenSeq, double>> dist;
    for (auto& [seq, w] : dist_map) dist.emplace_back(seq, w / total);
    data::EnumerableCond cond;
    cond.by_source[{kA}] = dist;
    double c = metrics::exact_tc(cond).bits_per_sentence;

    for (int m = 0; m < 40; ++m) {
      std::vector<std::vector<double>> pos(len, std::vector<double>(kA + vocab));
      for (auto& row : pos) {
        double z = 0.0;
        for (double& p : row) {
          p = rng.uniform() + 1e-6;
          z += p;
        }
        for (double& p : row) p /= z;
      }
      CHECK(metrics::exact_kl(dist, pos) >= c - 1e-9);
    }

    // marginal-matching model achieves the bound
    std::vector<std::vector<double>> marg(len, std::vector<double>(kA + vocab, 0.0));
    for (const auto& [seq, p] : dist)
      for (int i = 0; i < len; ++i) marg[i][seq[i]] += p;
    CHECK(metrics::exact_kl(dist, marg) == doctest::Approx(c).epsilon(1e-6));
  }
}

TEST_CASE("exact_mple_terms: decomposition identity and variational bound") {
  // tiny universe: Y/T are length-2 sequences over {a,b}; two Z patterns
  std::vector<TokenSeq> ys = {{kA, kA}, {kA, kB}, {kB, kA}, {kB, kB}};
  std::vector<TokenSeq> zs = {{data::kMask, data::kMask}, {kA, data::kMask}};
  std::vector<std::pair<TokenSeq, TokenSeq>> tz;
  for (const auto& t : ys)
    for (const auto& z : zs) tz.emplace_back(t, z);

  util::Rng rng(123);
  for (int it = 0; it < 100; ++it) {
    // random data distribution, decoder, input model, and Q
    std::vector<std::pair<TokenSeq, double>> p_data;
    double zp = 0.0;
    for (const auto& y : ys) {
      double w = rng.uniform() + 1e-3;
      p_data.emplace_back(y, w);
      zp += w;
    }
    for (auto& [y, p] : p_data) p /= zp;

    std::map<TokenSeq, std::map<TokenSeq, double>> dec;  // dec[z][t]
    for (const auto& z : zs) {
      double s = 0.0;
      for (const auto& t : ys) {
        double w = rng.uniform() + 1e-3;
        dec[z][t] = w;
        s += w;
      }
      for (auto& [t, w] : dec[z]) w /= s;
    }
    std::map<TokenSeq, double> inp;
    {
      double s = 0.0;
      for (const auto& z : zs) {
        inp[z] = rng.uniform() + 1e-3;
        s += inp[z];
      }
      for (auto& [z, w] : inp) w /= s;
    }
    metrics::EnumerableQ q;
    {
      double s = 0.0;
      for (const auto& [t, z] : tz) {
        double w = rng.uniform() + 1e-3;
        q.entries.push_back({t, z, w});
        s += w;
      }
      for (auto& e : q.entries) e.prob /= s;
    }

    metrics::MpleTerms terms = metrics::exact_mple_terms(
        p_data, q, [&](const TokenSeq& t, const TokenSeq& z) { return dec[z][t]; },
        [&](const TokenSeq& z) { return inp[z]; }, 0.2, ys, tz);

    CHECK(std::fabs(terms.l_mple - terms.l_mple_direct) < 1e-9);
    CHECK(terms.l_mple_direct >= terms.exact_nll - 1e-9);
    CHECK(terms.l_input >= -1e-12);
  }
}

TEST_CASE("degenerate one-point Q collapses the MPLE to the direct route") {
  std::vector<TokenSeq> ys = {{kA, kB}, {kB, kA}};
  TokenSeq full_mask = {data::kMask, data::kMask};
  std::vector<std::pair<TokenSeq, TokenSeq>> tz = {{ys[0], full_mask},
                                                   {ys[1], full_mask}};
  std::vector<std::pair<TokenSeq, double>> p_data = {{ys[0], 0.5}, {ys[1], 0.5}};
  metrics::EnumerableQ q;
  q.entries.push_back({ys[0], full_mask, 1.0});
  metrics::MpleTerms terms = metrics::exact_mple_terms(
      p_data, q, [](const TokenSeq& t, const TokenSeq&) { return 0.5; },
      [](const TokenSeq&) { return 1.0; }, 0.2, ys, tz);
  CHECK(terms.l_input == doctest::Approx(0.0));
  CHECK(terms.l_nat == doctest::Approx(1.0));  // -log2 0.5
  CHECK(std::fabs(terms.l_mple - terms.l_mple_direct) < 1e-9);
}
