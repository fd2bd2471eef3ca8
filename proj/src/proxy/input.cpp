#include "natlab/proxy/input.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace natlab::proxy {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kWeightFloor = 1e-12;

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// P(l = k) for l = max(1, floor(lambda L + 0.5)), lambda ~ U(0,1).
double cmlm_uniform_l_prob(int L, int k) {
  if (k < 1 || k > L) return 0.0;
  if (L == 1) return 1.0;
  if (k == 1) return 1.5 / L;
  if (k == L) return 0.5 / L;
  return 1.0 / L;
}

int cmlm_fixed_l(const MaskRule& rule, int L) {
  int l = static_cast<int>(std::ceil(rule.fixed_ratio * L));
  return std::clamp(l, 1, L);
}

void check_consistent(const data::TokenSeq& Z, const data::TokenSeq& T) {
  if (Z.size() != T.size())
    throw std::invalid_argument("mask pattern: |Z| != |T|");
  for (size_t i = 0; i < Z.size(); ++i)
    if (Z[i] != data::kMask && Z[i] != T[i])
      throw std::invalid_argument("mask pattern: unmasked position disagrees with T");
}

data::TokenSeq keep_positions(const data::TokenSeq& T, const std::vector<int>& keep) {
  data::TokenSeq z(T.size(), data::kMask);
  for (int i : keep) z[i] = T[i];
  return z;
}

std::vector<int> sample_uniform_subset(int L, int l, util::Rng& rng) {
  std::vector<int> pool(L);
  for (int i = 0; i < L; ++i) pool[i] = i;
  std::vector<int> keep;
  for (int k = 0; k < l; ++k) {
    int idx = rng.uniform_int(0, static_cast<int>(pool.size()) - 1);
    keep.push_back(pool[idx]);
    pool.erase(pool.begin() + idx);
  }
  return keep;
}

// Probability that sequential sampling without replacement (proportional to
// w) draws exactly the index set `keep`, in any order.
double subset_probability(const std::vector<double>& w, const std::vector<int>& keep) {
  double W = 0.0;
  for (double x : w) W += x;
  int m = static_cast<int>(keep.size());
  if (m == 0) return 1.0;
  std::vector<double> f(size_t(1) << m, 0.0);
  std::vector<double> sumw(size_t(1) << m, 0.0);
  f[0] = 1.0;
  for (size_t mask = 1; mask < f.size(); ++mask) {
    for (int b = 0; b < m; ++b) {
      if (!(mask >> b & 1)) continue;
      size_t prev = mask ^ (size_t(1) << b);
      if (sumw[mask] == 0.0) sumw[mask] = sumw[prev] + w[keep[b]];
      double denom = W - sumw[prev];
      if (denom <= 0.0) continue;
      f[mask] += f[prev] * w[keep[b]] / denom;
    }
  }
  return f.back();
}

struct GlatState {
  int l = 0;                   // number of positions to keep
  std::vector<double> weights; // selection weights (weighted variants only)
};

GlatState glat_state(const data::TokenSeq& T, const MaskRule& rule,
                     const MaskContext& ctx) {
  if (ctx.snapshot == nullptr || ctx.x == nullptr)
    throw std::invalid_argument("glat rule requires a model snapshot and source");
  int L = static_cast<int>(T.size());
  data::TokenSeq full_mask(T.size(), data::kMask);
  std::vector<std::vector<double>> dists = ctx.snapshot->position_dists(*ctx.x, full_mask);

  GlatState st;
  double lambda = rule.lambda_at(ctx.step);
  if (rule.kind == MaskRule::Kind::kGlatLevenshtein) {
    data::TokenSeq argmax(T.size());
    for (size_t i = 0; i < T.size(); ++i)
      argmax[i] = static_cast<int>(
          std::max_element(dists[i].begin(), dists[i].end()) - dists[i].begin());
    st.l = static_cast<int>(std::floor(lambda * levenshtein(argmax, T) + 0.5));
  } else {
    int mismatches = 0;
    for (size_t i = 0; i < T.size(); ++i) {
      int am = static_cast<int>(
          std::max_element(dists[i].begin(), dists[i].end()) - dists[i].begin());
      if (am != T[i]) ++mismatches;
    }
    st.l = static_cast<int>(std::floor(lambda * mismatches + 0.5));
  }
  st.l = std::clamp(st.l, 0, L);

  if (rule.kind == MaskRule::Kind::kGlatPref ||
      rule.kind == MaskRule::Kind::kGlatOneMinusPref) {
    st.weights.resize(T.size());
    for (size_t i = 0; i < T.size(); ++i) {
      double p = dists[i][T[i]];
      double wgt = rule.kind == MaskRule::Kind::kGlatPref ? p : 1.0 - p;
      st.weights[i] = std::max(wgt, kWeightFloor);
    }
  }
  return st;
}

}  // namespace

double MaskRule::lambda_at(int step) const {
  if (anneal_steps <= 0) return lambda_end;
  double t = std::min(1.0, static_cast<double>(step) / anneal_steps);
  return lambda_start + (lambda_end - lambda_start) * t;
}

MaskSample vanilla_input(const data::TokenSeq& T) {
  return {data::TokenSeq(T.size(), data::kMask), 0.0};
}

MaskSample sample_mask_cmlm(const data::TokenSeq& T, const MaskRule& rule,
                            util::Rng& rng) {
  int L = static_cast<int>(T.size());
  if (L < 1) throw std::invalid_argument("sample_mask_cmlm: empty target");
  int l;
  double log_l_prob;
  if (rule.kind == MaskRule::Kind::kCmlmUniform) {
    double lambda = rng.uniform();
    l = std::clamp(static_cast<int>(std::floor(lambda * L + 0.5)), 1, L);
    log_l_prob = std::log(cmlm_uniform_l_prob(L, l));
  } else if (rule.kind == MaskRule::Kind::kCmlmFixed) {
    l = cmlm_fixed_l(rule, L);
    log_l_prob = 0.0;
  } else {
    throw std::invalid_argument("sample_mask_cmlm: not a cmlm rule");
  }
  std::vector<int> keep = sample_uniform_subset(L, l, rng);
  return {keep_positions(T, keep), log_l_prob - log_choose(L, l)};
}

MaskSample sample_mask_glat(const data::TokenSeq& T, const MaskRule& rule,
                            const MaskContext& ctx, util::Rng& rng) {
  if (!rule.needs_snapshot())
    throw std::invalid_argument("sample_mask_glat: not a glat rule");
  int L = static_cast<int>(T.size());
  if (L < 1) throw std::invalid_argument("sample_mask_glat: empty target");
  GlatState st = glat_state(T, rule, ctx);

  std::vector<int> keep;
  if (st.weights.empty()) {
    keep = sample_uniform_subset(L, st.l, rng);
    return {keep_positions(T, keep), -log_choose(L, st.l)};
  }
  std::vector<double> pool = st.weights;
  for (int k = 0; k < st.l; ++k) {
    int idx = rng.categorical(pool);
    keep.push_back(idx);
    pool[idx] = 0.0;
  }
  double p = subset_probability(st.weights, keep);
  return {keep_positions(T, keep), std::log(p)};
}

MaskSample sample_mask(const data::TokenSeq& T, const MaskRule& rule,
                       const MaskContext& ctx, util::Rng& rng) {
  switch (rule.kind) {
    case MaskRule::Kind::kVanilla:
      return vanilla_input(T);
    case MaskRule::Kind::kCmlmUniform:
    case MaskRule::Kind::kCmlmFixed:
      return sample_mask_cmlm(T, rule, rng);
    default:
      return sample_mask_glat(T, rule, ctx, rng);
  }
}

double mask_pattern_logprob(const MaskRule& rule, const data::TokenSeq& Z,
                            const data::TokenSeq& T, const MaskContext& ctx) {
  check_consistent(Z, T);
  int L = static_cast<int>(T.size());
  std::vector<int> keep;
  for (int i = 0; i < L; ++i)
    if (Z[i] != data::kMask) keep.push_back(i);
  int u = static_cast<int>(keep.size());

  switch (rule.kind) {
    case MaskRule::Kind::kVanilla:
      return u == 0 ? 0.0 : kNegInf;
    case MaskRule::Kind::kCmlmUniform: {
      double pl = cmlm_uniform_l_prob(L, u);
      return pl > 0.0 ? std::log(pl) - log_choose(L, u) : kNegInf;
    }
    case MaskRule::Kind::kCmlmFixed:
      return u == cmlm_fixed_l(rule, L) ? -log_choose(L, u) : kNegInf;
    default: {
      GlatState st = glat_state(T, rule, ctx);
      if (u != st.l) return kNegInf;
      if (st.weights.empty()) return -log_choose(L, u);
      double p = subset_probability(st.weights, keep);
      return p > 0.0 ? std::log(p) : kNegInf;
    }
  }
}

int levenshtein(const data::TokenSeq& a, const data::TokenSeq& b) {
  size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace natlab::proxy
