#include "natlab/proxy/target.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "natlab/metrics/bleu.hpp"

namespace natlab::proxy {

namespace {

constexpr double kProbFloor = 1e-30;
constexpr double kTieTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

double nll(const std::vector<double>& dist, int token) {
  if (token < 0 || token >= static_cast<int>(dist.size()))
    throw std::invalid_argument("token id outside the prediction distribution");
  return -std::log(std::max(dist[token], kProbFloor));
}

}  // namespace

data::TokenSeq kd_target(const model::AtModel& teacher, const data::TokenSeq& x,
                         int beam) {
  return beam_search(teacher, x, beam).tokens;
}

AlignResult axe_align(const Dists& pred_dists, const data::TokenSeq& r, double delta) {
  int L = static_cast<int>(pred_dists.size());
  if (static_cast<int>(r.size()) != L)
    throw std::invalid_argument("axe_align: predictions and reference lengths differ");
  if (delta < 0.0) throw std::invalid_argument("axe_align: negative skip penalty");
  if (L == 0) return {};

  // State (i predictions consumed, j references consumed), split by whether
  // prediction i has aligned at least one reference token (dp_a) or was
  // skipped with <eps> (dp_e); only an aligned prediction may absorb
  // further reference tokens at cost delta * -log P_i(r_j).
  enum Move : char { kNone, kAlignFromA, kAlignFromE, kSkipPred, kSkipTarget };
  std::vector<std::vector<double>> dp_a(L + 1, std::vector<double>(L + 1, kInf));
  std::vector<std::vector<double>> dp_e(L + 1, std::vector<double>(L + 1, kInf));
  std::vector<std::vector<Move>> from_a(L + 1, std::vector<Move>(L + 1, kNone));
  std::vector<std::vector<Move>> from_e(L + 1, std::vector<Move>(L + 1, kNone));
  dp_e[0][0] = 0.0;  // nothing consumed; treated as a "skipped" pseudo-state

  for (int i = 1; i <= L; ++i) {
    for (int j = 0; j <= L; ++j) {
      // skip-prediction: prediction i emits <eps>, consumes no reference
      double eps_cost = nll(pred_dists[i - 1], data::kEps);
      double best_prev = std::min(dp_a[i - 1][j], dp_e[i - 1][j]);
      if (best_prev < kInf) {
        dp_e[i][j] = best_prev + eps_cost;
        from_e[i][j] = kSkipPred;
      }
      if (j == 0) continue;
      double align_cost = nll(pred_dists[i - 1], r[j - 1]);
      // tie preference: align, then skip-prediction (separate table), then
      // skip-target — so align installs first and skip-target needs a
      // strictly smaller cost to replace it
      if (dp_a[i - 1][j - 1] < kInf || dp_e[i - 1][j - 1] < kInf) {
        bool via_a = dp_a[i - 1][j - 1] <= dp_e[i - 1][j - 1];
        dp_a[i][j] = std::min(dp_a[i - 1][j - 1], dp_e[i - 1][j - 1]) + align_cost;
        from_a[i][j] = via_a ? kAlignFromA : kAlignFromE;
      }
      if (dp_a[i][j - 1] < kInf) {
        double skip_target = dp_a[i][j - 1] + delta * align_cost;
        if (skip_target < dp_a[i][j]) {
          dp_a[i][j] = skip_target;
          from_a[i][j] = kSkipTarget;
        }
      }
    }
  }

  AlignResult out;
  out.alignment.assign(L, {});
  bool in_a = dp_a[L][L] <= dp_e[L][L];
  out.cost = in_a ? dp_a[L][L] : dp_e[L][L];
  if (out.cost >= kInf)
    throw std::logic_error("axe_align: no feasible alignment");  // unreachable
  int i = L, j = L;
  while (i > 0 || j > 0) {
    Move m = in_a ? from_a[i][j] : from_e[i][j];
    switch (m) {
      case kAlignFromA:
      case kAlignFromE:
        out.alignment[i - 1].insert(out.alignment[i - 1].begin(), j - 1);
        in_a = (m == kAlignFromA);
        --i;
        --j;
        break;
      case kSkipPred:
        // predecessor state: whichever of dp_a/dp_e was smaller
        in_a = dp_a[i - 1][j] <= dp_e[i - 1][j];
        --i;
        break;
      case kSkipTarget:
        out.alignment[i - 1].insert(out.alignment[i - 1].begin(), j - 1);
        --j;
        break;
      default:
        throw std::logic_error("axe_align: broken backtrace");
    }
  }
  out.T.resize(L);
  for (int k = 0; k < L; ++k)
    out.T[k] = out.alignment[k].empty() ? data::kEps : r[out.alignment[k][0]];
  return out;
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  int n = static_cast<int>(cost.size());
  for (const auto& row : cost)
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("hungarian: cost matrix not square");
  if (n == 0) return {};
  // potentials method; p[j] = row matched to column j (1-based, 0 = none)
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace {

double assignment_cost(const std::vector<std::vector<double>>& cost) {
  std::vector<int> a = hungarian(cost);
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += cost[i][a[i]];
  return total;
}

}  // namespace

AlignResult oaxe_align(const Dists& pred_dists, const data::TokenSeq& r) {
  int L = static_cast<int>(pred_dists.size());
  if (static_cast<int>(r.size()) != L)
    throw std::invalid_argument("oaxe_align: predictions and reference lengths differ");
  if (L == 0) return {};
  std::vector<std::vector<double>> cost(L, std::vector<double>(L));
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) cost[i][j] = nll(pred_dists[i], r[j]);
  double opt = assignment_cost(cost);

  // lexicographically smallest optimal assignment (by reference index per
  // prediction, in prediction order): fix positions greedily, re-solving
  // the reduced problem to test feasibility at the optimal cost
  std::vector<int> avail(L);
  for (int j = 0; j < L; ++j) avail[j] = j;
  std::vector<int> assign(L, -1);
  double fixed = 0.0;
  for (int i = 0; i < L; ++i) {
    bool placed = false;
    for (size_t aj = 0; aj < avail.size() && !placed; ++aj) {
      int j = avail[aj];
      double rest = 0.0;
      int m = static_cast<int>(avail.size()) - 1;
      if (m > 0) {
        std::vector<std::vector<double>> sub(m, std::vector<double>(m));
        for (int si = 0; si < m; ++si) {
          int col = 0;
          for (int sj = 0; sj < m + 1; ++sj) {
            if (avail[sj] == j) continue;
            sub[si][col++] = cost[i + 1 + si][avail[sj]];
          }
        }
        rest = assignment_cost(sub);
      }
      if (fixed + cost[i][j] + rest <= opt + kTieTol) {
        assign[i] = j;
        fixed += cost[i][j];
        avail.erase(avail.begin() + static_cast<long>(aj));
        placed = true;
      }
    }
    if (!placed) throw std::logic_error("oaxe_align: lexicographic fix failed");
  }

  AlignResult out;
  out.cost = fixed;
  out.T.resize(L);
  out.alignment.assign(L, {});
  for (int i = 0; i < L; ++i) {
    out.T[i] = r[assign[i]];
    out.alignment[i] = {assign[i]};
  }
  return out;
}

CandidateSet make_candidate_set(std::vector<data::TokenSeq> targets) {
  if (targets.empty()) throw std::invalid_argument("empty candidate set");
  CandidateSet cs;
  cs.targets = std::move(targets);
  size_t n = cs.targets.size();
  cs.bleu.assign(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      cs.bleu[i][j] = metrics::sentence_bleu(cs.targets[i], cs.targets[j]);
  return cs;
}

data::TokenSeq dynamic_kd_select(const CandidateSet& gamma_set,
                                 const model::NatModel& nat, const data::TokenSeq& x,
                                 double beta, const std::vector<double>& gamma) {
  size_t n = gamma_set.targets.size();
  if (n == 0) throw std::invalid_argument("dynamic_kd_select: empty candidate set");
  if (gamma.size() != n)
    throw std::invalid_argument("dynamic_kd_select: gamma size != candidate count");
  size_t best = 0;
  double best_score = kInf;
  for (size_t k = 0; k < n; ++k) {
    const data::TokenSeq& t = gamma_set.targets[k];
    if (t.empty()) continue;  // an empty teacher output can never be a target
    data::TokenSeq z(t.size(), data::kMask);
    double nll_per_token = -nat.logprob(x, z, t).sum / static_cast<double>(t.size());
    double consensus = 0.0;
    for (size_t i = 0; i < n; ++i) consensus += gamma[i] * gamma_set.bleu[i][k];
    double score = nll_per_token - beta * consensus;
    if (score < best_score) {
      best_score = score;
      best = k;
    }
  }
  if (best_score == kInf)
    throw std::invalid_argument("dynamic_kd_select: no usable candidate");
  return gamma_set.targets[best];
}

namespace {

// Selection by the weighted-BLEU criterion alone (no model), as used when
// tuning gamma on the dev set.
size_t select_by_consensus(const CandidateSet& cs, const std::vector<double>& gamma) {
  size_t best = 0;
  double best_score = -kInf;
  for (size_t k = 0; k < cs.targets.size(); ++k) {
    double s = 0.0;
    for (size_t i = 0; i < cs.targets.size(); ++i) s += gamma[i] * cs.bleu[i][k];
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

}  // namespace

std::vector<double> tune_gamma(const std::vector<CandidateSet>& dev_sets,
                               const std::vector<std::vector<data::TokenSeq>>& dev_refs,
                               const std::vector<double>& grid, double beta) {
  if (dev_sets.empty() || dev_sets.size() != dev_refs.size())
    throw std::invalid_argument("tune_gamma: dev sets and references must align");
  for (const auto& refs : dev_refs)
    if (refs.empty()) throw std::invalid_argument("tune_gamma: missing references");
  if (grid.empty()) throw std::invalid_argument("tune_gamma: empty grid");
  size_t n = dev_sets[0].targets.size();
  for (const CandidateSet& cs : dev_sets)
    if (cs.targets.size() != n)
      throw std::invalid_argument("tune_gamma: inconsistent candidate counts");

  auto objective = [&](const std::vector<double>& gamma) {
    double total = 0.0;
    for (size_t d = 0; d < dev_sets.size(); ++d) {
      size_t k = select_by_consensus(dev_sets[d], gamma);
      total += metrics::l_target_hat(dev_refs[d], dev_sets[d].targets[k], beta);
    }
    return total / static_cast<double>(dev_sets.size());
  };

  std::vector<double> gamma(n, grid.front());
  double best = objective(gamma);
  for (int sweep = 0; sweep < 10; ++sweep) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      double keep = gamma[i];
      double local_best = best;
      double local_val = keep;
      for (double g : grid) {
        gamma[i] = g;
        double obj = objective(gamma);
        if (obj < local_best - 1e-12) {
          local_best = obj;
          local_val = g;
        }
      }
      gamma[i] = local_val;
      if (local_val != keep) {
        best = local_best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return gamma;
}

}  // namespace natlab::proxy
