#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "natlab/proxy/input.hpp"
#include "natlab/proxy/target.hpp"
#include "natlab/util/rng.hpp"

using namespace natlab;
using proxy::AlignResult;
using proxy::Dists;
using proxy::MaskContext;
using proxy::MaskRule;

namespace {

Dists random_dists(int L, int vocab, util::Rng& rng) {
  Dists d(L, std::vector<double>(vocab));
  for (auto& row : d) {
    double sum = 0.0;
    for (double& p : row) {
      p = -std::log(std::max(rng.uniform(), 1e-12));  // exponential weights
      sum += p;
    }
    for (double& p : row) p /= sum;
  }
  return d;
}

double floored_nll(const std::vector<double>& dist, int tok) {
  return -std::log(std::max(dist[tok], 1e-30));
}

// Brute force over all monotonic assignments alpha (reference j -> prediction
// alpha_j, non-decreasing). The first reference a prediction receives costs
// the full NLL, further ones cost delta times it; untouched predictions pay
// the NLL of <eps>.
double axe_brute_force(const Dists& dists, const data::TokenSeq& r, double delta) {
  int L = static_cast<int>(r.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> alpha(L, 0);
  std::function<void(int)> rec = [&](int j) {
    if (j == L) {
      double cost = 0.0;
      std::vector<int> count(L, 0);
      for (int jj = 0; jj < L; ++jj) {
        int i = alpha[jj];
        cost += (count[i] == 0 ? 1.0 : delta) * floored_nll(dists[i], r[jj]);
        ++count[i];
      }
      for (int i = 0; i < L; ++i)
        if (count[i] == 0) cost += floored_nll(dists[i], data::kEps);
      best = std::min(best, cost);
      return;
    }
    for (int i = (j == 0 ? 0 : alpha[j - 1]); i < L; ++i) {
      alpha[j] = i;
      rec(j + 1);
    }
  };
  rec(0);
  return best;
}

double oaxe_brute_force(const Dists& dists, const data::TokenSeq& r) {
  int L = static_cast<int>(r.size());
  std::vector<int> perm(L);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int i = 0; i < L; ++i) cost += floored_nll(dists[i], r[perm[i]]);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

data::TokenSeq random_ref(int L, int vocab, util::Rng& rng) {
  data::TokenSeq r(L);
  for (int& t : r) t = rng.uniform_int(data::kFirstToken, vocab - 1);
  return r;
}

}  // namespace

TEST_CASE("axe_align matches brute force on random instances") {
  util::Rng rng(101);
  const double deltas[] = {0.0, 0.5, 1.0, 5.0};
  for (int it = 0; it < 100; ++it) {
    int L = rng.uniform_int(1, 6);
    Dists d = random_dists(L, 10, rng);
    data::TokenSeq r = random_ref(L, 10, rng);
    double delta = deltas[it % 4];
    AlignResult res = proxy::axe_align(d, r, delta);
    double brute = axe_brute_force(d, r, delta);
    CHECK(std::fabs(res.cost - brute) < 1e-9);
    // re-evaluating the returned alignment reproduces the cost
    double recomputed = 0.0;
    for (int i = 0; i < L; ++i) {
      if (res.alignment[i].empty()) {
        recomputed += floored_nll(d[i], data::kEps);
        CHECK(res.T[i] == data::kEps);
      } else {
        CHECK(res.T[i] == r[res.alignment[i][0]]);
        for (size_t k = 0; k < res.alignment[i].size(); ++k)
          recomputed += (k == 0 ? 1.0 : delta) * floored_nll(d[i], r[res.alignment[i][k]]);
      }
    }
    CHECK(std::fabs(recomputed - res.cost) < 1e-9);
  }
}

TEST_CASE("axe hand example: confident diagonal") {
  // P1 = {a:0.9, eps:0.05, b:0.05}, P2 = {b:0.8, a:0.1, eps:0.1}
  int a = data::kFirstToken, b = data::kFirstToken + 1;
  Dists d(2, std::vector<double>(data::kFirstToken + 2, 0.0));
  d[0][a] = 0.9;
  d[0][data::kEps] = 0.05;
  d[0][b] = 0.05;
  d[1][b] = 0.8;
  d[1][a] = 0.1;
  d[1][data::kEps] = 0.1;
  AlignResult res = proxy::axe_align(d, {a, b}, 1.0);
  CHECK(res.T == data::TokenSeq{a, b});
  CHECK(res.cost == doctest::Approx(-std::log(0.9) - std::log(0.8)).epsilon(1e-9));
}

TEST_CASE("axe with a huge skip penalty never multi-aligns") {
  util::Rng rng(102);
  for (int it = 0; it < 50; ++it) {
    int L = rng.uniform_int(2, 6);
    Dists d = random_dists(L, 9, rng);
    data::TokenSeq r = random_ref(L, 9, rng);
    AlignResult res = proxy::axe_align(d, r, 1e9);
    for (const auto& lst : res.alignment) CHECK(lst.size() <= 1);
  }
}

TEST_CASE("oaxe_align matches brute force over permutations") {
  util::Rng rng(103);
  for (int it = 0; it < 100; ++it) {
    int L = rng.uniform_int(1, 7);
    Dists d = random_dists(L, 11, rng);
    data::TokenSeq r = random_ref(L, 11, rng);
    AlignResult res = proxy::oaxe_align(d, r);
    CHECK(std::fabs(res.cost - oaxe_brute_force(d, r)) < 1e-9);
    // T must be a permutation of r
    data::TokenSeq st = res.T, sr = r;
    std::sort(st.begin(), st.end());
    std::sort(sr.begin(), sr.end());
    CHECK(st == sr);
  }
}

TEST_CASE("oaxe hand example: swapped peaks") {
  int a = data::kFirstToken, b = data::kFirstToken + 1;
  Dists d(2, std::vector<double>(data::kFirstToken + 2, 0.01));
  d[0][b] = 0.9;
  d[1][a] = 0.9;
  AlignResult res = proxy::oaxe_align(d, {a, b});
  CHECK(res.T == data::TokenSeq{b, a});
}

TEST_CASE("oaxe tie-break is lexicographically smallest") {
  // both predictions uniform: every permutation ties; expect identity
  Dists d(3, std::vector<double>(8, 1.0 / 8));
  data::TokenSeq r = {5, 7, 6};
  AlignResult res = proxy::oaxe_align(d, r);
  CHECK(res.T == r);
  CHECK(res.alignment[0][0] == 0);
  CHECK(res.alignment[1][0] == 1);
  CHECK(res.alignment[2][0] == 2);
}

TEST_CASE("hungarian solves a known assignment") {
  std::vector<std::vector<double>> c = {{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  std::vector<int> a = proxy::hungarian(c);
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += c[i][a[i]];
  CHECK(total == doctest::Approx(5.0));  // 1 + 2 + 2
}

TEST_CASE("vanilla input") {
  proxy::MaskSample s = proxy::vanilla_input({7, 8, 9, 10});
  CHECK(s.Z == data::TokenSeq(4, data::kMask));
  CHECK(s.log_q == 0.0);
}

TEST_CASE("cmlm fixed masks exactly ceil(0.2 L)") {
  MaskRule rule;
  rule.kind = MaskRule::Kind::kCmlmFixed;
  util::Rng rng(104);
  data::TokenSeq t(10, data::kFirstToken);
  proxy::MaskSample s = proxy::sample_mask_cmlm(t, rule, rng);
  int unmasked = 0;
  for (int z : s.Z)
    if (z != data::kMask) ++unmasked;
  CHECK(unmasked == 2);
}

TEST_CASE("cmlm uniform mean unmasked fraction is about one half") {
  MaskRule rule;
  rule.kind = MaskRule::Kind::kCmlmUniform;
  util::Rng rng(105);
  data::TokenSeq t(10, data::kFirstToken);
  double total = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    proxy::MaskSample s = proxy::sample_mask_cmlm(t, rule, rng);
    for (int z : s.Z)
      if (z != data::kMask) total += 1.0;
  }
  CHECK(std::fabs(total / (n * 10.0) - 0.5) < 0.02);
}

TEST_CASE("cmlm sampled log_q agrees with the analytic pattern probability") {
  MaskRule rule;
  rule.kind = MaskRule::Kind::kCmlmUniform;
  util::Rng rng(106);
  data::TokenSeq t = {5, 6, 7, 8, 9};
  for (int i = 0; i < 50; ++i) {
    proxy::MaskSample s = proxy::sample_mask_cmlm(t, rule, rng);
    double lp = proxy::mask_pattern_logprob(rule, s.Z, t, {});
    CHECK(s.log_q == doctest::Approx(lp).epsilon(1e-12));
  }
}

TEST_CASE("mask pattern probabilities sum to one for model-free rules") {
  for (MaskRule::Kind kind : {MaskRule::Kind::kVanilla, MaskRule::Kind::kCmlmUniform,
                              MaskRule::Kind::kCmlmFixed}) {
    MaskRule rule;
    rule.kind = kind;
    for (int L = 1; L <= 4; ++L) {
      data::TokenSeq t(L);
      for (int i = 0; i < L; ++i) t[i] = data::kFirstToken + i;
      double sum = 0.0;
      for (int mask = 0; mask < (1 << L); ++mask) {
        data::TokenSeq z(t);
        for (int i = 0; i < L; ++i)
          if (!(mask >> i & 1)) z[i] = data::kMask;
        double lp = proxy::mask_pattern_logprob(rule, z, t, {});
        if (std::isfinite(lp)) sum += std::exp(lp);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("mask pattern probabilities sum to one for glat rules") {
  model::ModelConfig cfg;
  cfg.vocab = 12;
  cfg.d_model = 16;
  cfg.d_ffn = 32;
  model::NatModel nat(cfg, 42);
  data::TokenSeq x = {5, 6, 7};
  MaskContext ctx{&nat, &x, 100};
  for (MaskRule::Kind kind :
       {MaskRule::Kind::kGlat, MaskRule::Kind::kGlatLevenshtein,
        MaskRule::Kind::kGlatPref, MaskRule::Kind::kGlatOneMinusPref}) {
    MaskRule rule;
    rule.kind = kind;
    rule.anneal_steps = 1000;
    for (int L = 1; L <= 4; ++L) {
      data::TokenSeq t(L);
      for (int i = 0; i < L; ++i) t[i] = data::kFirstToken + (i % 7);
      double sum = 0.0;
      for (int mask = 0; mask < (1 << L); ++mask) {
        data::TokenSeq z(t);
        for (int i = 0; i < L; ++i)
          if (!(mask >> i & 1)) z[i] = data::kMask;
        double lp = proxy::mask_pattern_logprob(rule, z, t, ctx);
        if (std::isfinite(lp)) sum += std::exp(lp);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("glat sampled log_q agrees with the pattern probability") {
  model::ModelConfig cfg;
  cfg.vocab = 12;
  cfg.d_model = 16;
  cfg.d_ffn = 32;
  model::NatModel nat(cfg, 43);
  data::TokenSeq x = {5, 6, 7, 8};
  MaskContext ctx{&nat, &x, 7};
  util::Rng rng(107);
  for (MaskRule::Kind kind : {MaskRule::Kind::kGlat, MaskRule::Kind::kGlatPref,
                              MaskRule::Kind::kGlatOneMinusPref}) {
    MaskRule rule;
    rule.kind = kind;
    rule.anneal_steps = 100;
    data::TokenSeq t = {6, 7, 8, 9, 10};
    for (int i = 0; i < 20; ++i) {
      proxy::MaskSample s = proxy::sample_mask_glat(t, rule, ctx, rng);
      double lp = proxy::mask_pattern_logprob(rule, s.Z, t, ctx);
      CHECK(s.log_q == doctest::Approx(lp).epsilon(1e-9));
    }
  }
}

TEST_CASE("lambda schedule anneals between its endpoints") {
  MaskRule rule;
  rule.kind = MaskRule::Kind::kGlat;
  rule.anneal_steps = 100;
  CHECK(rule.lambda_at(0) == doctest::Approx(0.5));
  CHECK(rule.lambda_at(50) == doctest::Approx(0.4));
  CHECK(rule.lambda_at(100) == doctest::Approx(0.3));
  CHECK(rule.lambda_at(100000) == doctest::Approx(0.3));
}

TEST_CASE("levenshtein distance") {
  CHECK(proxy::levenshtein({1, 2, 3}, {1, 2, 3}) == 0);
  CHECK(proxy::levenshtein({1, 2, 3}, {1, 3}) == 1);
  CHECK(proxy::levenshtein({}, {1, 2}) == 2);
  CHECK(proxy::levenshtein({1, 2, 3, 4}, {4, 3, 2, 1}) == 4);  // sub x2 + others
}

TEST_CASE("dynamic_kd_select degenerate cases") {
  model::ModelConfig cfg;
  cfg.vocab = 12;
  cfg.d_model = 16;
  cfg.d_ffn = 32;
  model::NatModel nat(cfg, 44);
  data::TokenSeq x = {5, 6};
  proxy::CandidateSet one = proxy::make_candidate_set({{7, 8, 9}});
  CHECK(proxy::dynamic_kd_select(one, nat, x, 0.2, {1.0}) == data::TokenSeq{7, 8, 9});

  // beta = 0: pure argmin of the per-token NLL
  proxy::CandidateSet two = proxy::make_candidate_set({{7, 8, 9}, {9, 8}});
  data::TokenSeq picked = proxy::dynamic_kd_select(two, nat, x, 0.0, {1.0, 1.0});
  auto nll_per_tok = [&](const data::TokenSeq& t) {
    data::TokenSeq z(t.size(), data::kMask);
    return -nat.logprob(x, z, t).sum / t.size();
  };
  double best = std::min(nll_per_tok(two.targets[0]), nll_per_tok(two.targets[1]));
  CHECK(nll_per_tok(picked) == doctest::Approx(best));
}

TEST_CASE("tune_gamma finds weights that favor the reference-matching candidate") {
  // candidate 1 of every set equals all references; candidate 0 does not
  std::vector<proxy::CandidateSet> sets;
  std::vector<std::vector<data::TokenSeq>> refs;
  data::TokenSeq good = {5, 6, 7, 8};
  data::TokenSeq bad = {9, 10, 11, 12};
  sets.push_back(proxy::make_candidate_set({bad, good}));
  refs.push_back({good, good});
  std::vector<double> grid;
  for (double g = 0.5; g <= 3.0 + 1e-9; g += 0.1) grid.push_back(g);
  std::vector<double> gamma = proxy::tune_gamma(sets, refs, grid, 0.2);
  size_t best = 0;
  double best_score = -1.0;
  for (size_t k = 0; k < 2; ++k) {
    double s = 0.0;
    for (size_t i = 0; i < 2; ++i) s += gamma[i] * sets[0].bleu[i][k];
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  CHECK(best == 1);
}
