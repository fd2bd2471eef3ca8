#include "natlab/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "natlab/decode/decode.hpp"
#include "natlab/metrics/bleu.hpp"
#include "natlab/metrics/model_metrics.hpp"
#include "natlab/model/input_predictor.hpp"
#include "natlab/proxy/target.hpp"

namespace natlab::train {

namespace {
constexpr double kLog2 = 0.69314718055994530942;
}

double lr_at(const OptimConfig& cfg, int step) {
  if (cfg.warmup <= 0) return cfg.peak_lr / std::sqrt(std::max(1, step));
  if (step <= cfg.warmup) return cfg.peak_lr * step / cfg.warmup;
  return cfg.peak_lr * std::sqrt(static_cast<double>(cfg.warmup) / step);
}

Adam::Adam(model::ParamStore& ps) : ps_(ps) {
  for (const model::Param& p : ps.all()) {
    m_.emplace_back(p.value.shape);
    v_.emplace_back(p.value.shape);
  }
}

void Adam::step(double lr) {
  constexpr double b1 = 0.9, b2 = 0.98, eps = 1e-8;
  ++t_;
  double c1 = 1.0 - std::pow(b1, t_);
  double c2 = 1.0 - std::pow(b2, t_);
  auto& params = ps_.all();
  for (size_t i = 0; i < params.size(); ++i) {
    compute::Tensor& val = params[i].value;
    const compute::Tensor& g = params[i].grad;
    for (int j = 0; j < val.size(); ++j) {
      m_[i].v[j] = b1 * m_[i].v[j] + (1.0 - b1) * g.v[j];
      v_[i].v[j] = b2 * v_[i].v[j] + (1.0 - b2) * g.v[j] * g.v[j];
      val.v[j] -= lr * (m_[i].v[j] / c1) / (std::sqrt(v_[i].v[j] / c2) + eps);
    }
  }
}

namespace {

void scale_grads(model::ParamStore& ps, double c) {
  for (model::Param& p : ps.all())
    for (double& g : p.grad.v) g *= c;
}

std::vector<int> sample_batch(util::Rng& rng, int corpus_size, int batch) {
  std::vector<int> idx(batch);
  for (int& i : idx) i = rng.uniform_int(0, corpus_size - 1);
  return idx;
}

std::vector<double> flat_values(const model::ParamStore& ps) {
  std::vector<double> out;
  for (const model::Param& p : ps.all())
    out.insert(out.end(), p.value.v.begin(), p.value.v.end());
  return out;
}

}  // namespace

double at_dev_nll(const model::AtModel& at, const data::ParallelCorpus& dev_set) {
  double total = 0.0;
  long tokens = 0;
  for (const auto& [x, y] : dev_set.pairs) {
    total -= at.logprob(x, y).sum;
    tokens += static_cast<long>(y.size());
  }
  return total / static_cast<double>(tokens) / kLog2;
}

double nat_dev_nll(const model::NatModel& nat, const data::ParallelCorpus& dev_set) {
  double total = 0.0;
  long tokens = 0;
  for (const auto& [x, y] : dev_set.pairs) {
    data::TokenSeq z(y.size(), data::kMask);
    total -= nat.logprob(x, z, y).sum;
    tokens += static_cast<long>(y.size());
  }
  return total / static_cast<double>(tokens) / kLog2;
}

double dev_bleu(const model::NatModel& nat, const data::ParallelCorpus& dev_set,
                uint64_t seed, bool input_sampling) {
  model::InputPredictor ip(&nat);
  util::Rng rng(seed);
  decode::DecodeOptions opts;
  opts.strategy =
      input_sampling ? decode::Strategy::kInputSampling : decode::Strategy::kDefault;
  double total = 0.0;
  for (const auto& [x, y] : dev_set.pairs)
    total += metrics::sentence_bleu(y, decode::decode(nat, ip, x, opts, rng).tokens);
  return 100.0 * total / static_cast<double>(dev_set.pairs.size());
}

AtTrainResult train_at(const model::ModelConfig& cfg, const OptimConfig& optim,
                       const data::ParallelCorpus& train_set,
                       const data::ParallelCorpus& dev_set) {
  if (train_set.pairs.empty() || dev_set.pairs.empty())
    throw std::invalid_argument("train_at: empty corpus");
  model::AtModel model(cfg, optim.seed);
  Adam adam(model.params());
  util::Rng rng(optim.seed ^ 0x5eedull);

  std::vector<double> nll_trace;
  double init_nll = at_dev_nll(model, dev_set);
  int worse_streak = 0;

  for (int step = 1; step <= optim.steps; ++step) {
    model.params().zero_grad();
    std::vector<int> batch =
        sample_batch(rng, static_cast<int>(train_set.pairs.size()), optim.batch_size);
    for (int i : batch) {
      compute::Graph g;
      compute::Graph::Ref loss = model.build_loss(g, train_set.pairs[i].first,
                                                  train_set.pairs[i].second,
                                                  optim.label_smoothing);
      g.backward(loss);
    }
    scale_grads(model.params(), 1.0 / optim.batch_size);
    adam.step(lr_at(optim, step));

    if (step % optim.eval_every == 0 || step == optim.steps) {
      double nll = at_dev_nll(model, dev_set);
      nll_trace.push_back(nll);
      if (!std::isfinite(nll) || nll > init_nll) {
        if (++worse_streak >= 3)
          throw NumericError("teacher training diverged: dev NLL " +
                             std::to_string(nll) + " bits/token above initial " +
                             std::to_string(init_nll));
      } else {
        worse_streak = 0;
      }
    }
  }
  return {std::move(model.params()), std::move(nll_trace)};
}

namespace {

struct DynamicKdState {
  std::vector<proxy::CandidateSet> per_pair;  // aligned with train pairs
  std::vector<double> gamma;
};

}  // namespace

NatTrainResult train_nat(const NatTrainConfig& cfg,
                         const data::ParallelCorpus& train_set,
                         const data::ParallelCorpus& dev_set) {
  using Method = TargetConfig::Method;
  if (train_set.pairs.empty() || dev_set.pairs.empty())
    throw std::invalid_argument("train_nat: empty corpus");

  // Teachers and fixed targets are prepared once, before any NAT updates.
  std::vector<model::AtModel> teachers;
  for (const std::string& dir : cfg.target.teacher_checkpoints)
    teachers.emplace_back(model::load_checkpoint(dir));
  if (cfg.target.method == Method::kKd && teachers.size() != 1)
    throw std::invalid_argument("kd target needs exactly one teacher checkpoint");
  if (cfg.target.method == Method::kDynamicKd && teachers.empty())
    throw std::invalid_argument("dynamic kd needs at least one teacher checkpoint");

  std::map<data::TokenSeq, std::vector<data::TokenSeq>> teacher_out;
  auto distill = [&](const data::TokenSeq& x) -> const std::vector<data::TokenSeq>& {
    auto it = teacher_out.find(x);
    if (it != teacher_out.end()) return it->second;
    std::vector<data::TokenSeq> outs;
    for (const model::AtModel& t : teachers) outs.push_back(proxy::kd_target(t, x));
    return teacher_out.emplace(x, std::move(outs)).first->second;
  };

  std::vector<data::TokenSeq> fixed_targets(train_set.pairs.size());
  DynamicKdState dkd;
  if (cfg.target.method == Method::kKd) {
    for (size_t i = 0; i < train_set.pairs.size(); ++i)
      fixed_targets[i] = distill(train_set.pairs[i].first)[0];
  } else if (cfg.target.method == Method::kDynamicKd) {
    for (const auto& [x, y] : train_set.pairs) {
      std::vector<data::TokenSeq> cands = {y};
      for (const data::TokenSeq& t : distill(x))
        if (!t.empty()) cands.push_back(t);
      dkd.per_pair.push_back(proxy::make_candidate_set(std::move(cands)));
    }
    dkd.gamma = cfg.target.gamma;
    size_t n_cands = 1 + teachers.size();
    if (dkd.gamma.empty()) {
      if (dev_set.refs.empty())
        throw std::invalid_argument("dynamic kd gamma tuning needs dev references");
      std::vector<proxy::CandidateSet> dev_sets;
      std::vector<std::vector<data::TokenSeq>> dev_refs;
      for (const auto& [x, y] : dev_set.pairs) {
        auto it = dev_set.refs.find(x);
        if (it == dev_set.refs.end()) continue;
        std::vector<data::TokenSeq> cands = {y};
        for (const data::TokenSeq& t : distill(x))
          if (!t.empty()) cands.push_back(t);
        if (cands.size() != n_cands) continue;  // a teacher emitted nothing
        dev_sets.push_back(proxy::make_candidate_set(std::move(cands)));
        dev_refs.push_back(it->second);
      }
      std::vector<double> grid;
      for (double g = 0.5; g <= 3.0 + 1e-9; g += 0.1) grid.push_back(g);
      dkd.gamma = proxy::tune_gamma(dev_sets, dev_refs, grid, cfg.target.beta);
    }
    if (dkd.gamma.size() != n_cands)
      throw std::invalid_argument("dynamic kd gamma size must be 1 + #teachers");
  } else {
    for (size_t i = 0; i < train_set.pairs.size(); ++i)
      fixed_targets[i] = train_set.pairs[i].second;
  }

  model::NatModel nat(cfg.model, cfg.optim.seed);
  Adam adam(nat.params());
  util::Rng rng(cfg.optim.seed ^ 0xa11ull);

  NatTrainResult out;
  out.gamma = dkd.gamma;
  long processed = 0;
  struct Kept {
    double bleu;
    int step;
    model::ParamStore params;
  };
  std::vector<Kept> kept;

  auto evaluate = [&](int step) {
    metrics::MetricsRecord rec;
    rec.config_id = cfg.config_id;
    rec.seed = cfg.optim.seed;
    rec.step = step;
    rec.l_nat = nat_dev_nll(nat, dev_set);
    rec.bleu = dev_bleu(nat, dev_set, cfg.optim.seed + step);
    rec.finalize();
    out.records.push_back(rec);
    kept.push_back({rec.bleu, step, nat.params()});
    std::sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
      return a.bleu != b.bleu ? a.bleu > b.bleu : a.step < b.step;
    });
    if (static_cast<int>(kept.size()) > cfg.optim.avg_k)
      kept.resize(cfg.optim.avg_k);
  };

  for (int step = 1; step <= cfg.optim.steps; ++step) {
    std::vector<int> batch = sample_batch(
        rng, static_cast<int>(train_set.pairs.size()), cfg.optim.batch_size);

    // E-step: build proxies against the frozen current snapshot.
    std::vector<double> before = flat_values(nat.params());
    struct Proxied {
      const data::TokenSeq* x;
      data::TokenSeq t, z;
    };
    std::vector<Proxied> ready;
    for (int i : batch) {
      ++processed;
      const auto& [x, y] = train_set.pairs[i];
      try {
        data::TokenSeq t;
        switch (cfg.target.method) {
          case Method::kRaw:
          case Method::kKd:
            t = fixed_targets[i];
            break;
          case Method::kAxe: {
            data::TokenSeq full(y.size(), data::kMask);
            t = proxy::axe_align(nat.position_dists(x, full), y,
                                 cfg.target.skip_penalty).T;
            break;
          }
          case Method::kOaxe: {
            if (step <= cfg.target.pretrain_steps) {
              t = y;
            } else {
              data::TokenSeq full(y.size(), data::kMask);
              t = proxy::oaxe_align(nat.position_dists(x, full), y).T;
            }
            break;
          }
          case Method::kDynamicKd:
            t = proxy::dynamic_kd_select(dkd.per_pair[i], nat, x, cfg.target.beta,
                                         dkd.gamma);
            break;
        }
        if (t.empty()) throw std::invalid_argument("empty proxy target");
        proxy::MaskContext ctx{&nat, &x, step};
        proxy::MaskSample ms = proxy::sample_mask(t, cfg.input_rule, ctx, rng);
        ready.push_back({&x, std::move(t), std::move(ms.Z)});
      } catch (const NumericError&) {
        throw;
      } catch (const std::exception&) {
        ++out.skipped;
        if (out.skipped * 100 > processed)
          throw NumericError("more than 1% of pairs failed proxy construction (" +
                             std::to_string(out.skipped) + " of " +
                             std::to_string(processed) + ")");
      }
    }
    if (flat_values(nat.params()) != before)
      throw NumericError("E-step mutated model parameters");

    if (ready.empty()) continue;

    // M-step: gradient update of the NAT against the fixed proxies.
    nat.params().zero_grad();
    for (const Proxied& p : ready) {
      compute::Graph g;
      compute::Graph::Ref loss =
          nat.build_token_loss(g, *p.x, p.z, p.t, cfg.optim.label_smoothing);
      loss = g.add(loss, g.scale(nat.build_length_loss(g, *p.x,
                                                       static_cast<int>(p.t.size())),
                                 0.1));
      loss = g.add(loss, nat.build_mask_head_loss(g, *p.x, p.z));
      g.backward(loss);
    }
    scale_grads(nat.params(), 1.0 / static_cast<double>(ready.size()));
    adam.step(lr_at(cfg.optim, step));

    if (step % cfg.optim.eval_every == 0 || step == cfg.optim.steps) evaluate(step);
  }

  std::vector<const model::ParamStore*> ptrs;
  for (const Kept& k : kept) ptrs.push_back(&k.params);
  out.params = model::average_stores(ptrs);
  out.params.meta = nat.params().meta;
  return out;
}

metrics::MetricsRecord evaluate_config(const NatTrainConfig& cfg,
                                       const model::NatModel& nat,
                                       const data::ParallelCorpus& dev_set,
                                       const EvalOptions& opts) {
  using Method = TargetConfig::Method;
  if (dev_set.pairs.empty()) throw std::invalid_argument("evaluate_config: empty dev set");

  std::vector<model::AtModel> teachers;
  if (cfg.target.method == Method::kKd || cfg.target.method == Method::kDynamicKd) {
    for (const std::string& dir : cfg.target.teacher_checkpoints)
      teachers.emplace_back(model::load_checkpoint(dir));
    if (teachers.empty())
      throw std::invalid_argument("evaluate_config: target method needs teachers");
    if (cfg.target.method == Method::kDynamicKd &&
        cfg.target.gamma.size() != 1 + teachers.size())
      throw std::invalid_argument("evaluate_config: dynamic kd needs explicit gamma");
  }
  std::map<data::TokenSeq, std::vector<data::TokenSeq>> teacher_out;
  auto distill = [&](const data::TokenSeq& x) -> const std::vector<data::TokenSeq>& {
    auto it = teacher_out.find(x);
    if (it != teacher_out.end()) return it->second;
    std::vector<data::TokenSeq> outs;
    for (const model::AtModel& t : teachers) outs.push_back(proxy::kd_target(t, x));
    return teacher_out.emplace(x, std::move(outs)).first->second;
  };

  util::Rng rng(opts.seed ^ 0xe7a1ull);
  std::vector<metrics::ProxiedPair> proxied;
  std::vector<std::pair<data::TokenSeq, data::TokenSeq>> xt;
  double target_bits = 0.0;
  long target_tokens = 0;
  for (const auto& [x, y] : dev_set.pairs) {
    data::TokenSeq t;
    switch (cfg.target.method) {
      case Method::kRaw:
        t = y;
        break;
      case Method::kKd:
        t = distill(x)[0];
        break;
      case Method::kAxe: {
        data::TokenSeq full(y.size(), data::kMask);
        t = proxy::axe_align(nat.position_dists(x, full), y, cfg.target.skip_penalty).T;
        break;
      }
      case Method::kOaxe: {
        data::TokenSeq full(y.size(), data::kMask);
        t = proxy::oaxe_align(nat.position_dists(x, full), y).T;
        break;
      }
      case Method::kDynamicKd: {
        std::vector<data::TokenSeq> cands = {y};
        for (const data::TokenSeq& d : distill(x))
          if (!d.empty()) cands.push_back(d);
        std::vector<double> gamma(cfg.target.gamma.begin(),
                                  cfg.target.gamma.begin() + cands.size());
        t = proxy::dynamic_kd_select(proxy::make_candidate_set(std::move(cands)), nat,
                                     x, cfg.target.beta, gamma);
        break;
      }
    }
    if (t.empty()) continue;
    proxy::MaskContext ctx{&nat, &x, cfg.optim.steps};
    for (int s = 0; s < opts.mask_samples; ++s)
      proxied.push_back({x, t, proxy::sample_mask(t, cfg.input_rule, ctx, rng).Z});
    auto rit = dev_set.refs.find(x);
    if (rit != dev_set.refs.end()) {
      target_bits += metrics::l_target_hat(rit->second, t, opts.beta);
      target_tokens += static_cast<long>(t.size());
    }
    xt.emplace_back(x, std::move(t));
  }
  if (proxied.empty())
    throw std::invalid_argument("evaluate_config: no pair produced a proxy target");

  metrics::MetricsRecord rec;
  rec.config_id = cfg.config_id;
  rec.seed = opts.seed;
  rec.step = cfg.optim.steps;
  rec.l_nat = metrics::l_nat(nat, proxied);
  model::InputPredictor ip(&nat);
  util::Rng irng(opts.seed ^ 0x1fu);
  rec.l_input = metrics::l_input(ip, cfg.input_rule, xt, &nat, cfg.optim.steps,
                                 opts.mask_samples, irng)
                    .bits_per_token;
  rec.l_target_hat =
      target_tokens > 0 ? target_bits / static_cast<double>(target_tokens) : 0.0;
  rec.bleu = dev_bleu(nat, dev_set, opts.seed);
  rec.finalize();
  return rec;
}

double estimate_tc(const model::ModelConfig& family, const OptimConfig& optim,
                   const data::ParallelCorpus& train_set,
                   const data::ParallelCorpus& heldout) {
  NatTrainConfig vanilla;
  vanilla.config_id = "vtc";
  vanilla.model = family;
  vanilla.target.method = TargetConfig::Method::kRaw;
  vanilla.input_rule.kind = proxy::MaskRule::Kind::kVanilla;
  vanilla.optim = optim;
  NatTrainResult nat_res = train_nat(vanilla, train_set, heldout);
  model::NatModel nat(std::move(nat_res.params));

  AtTrainResult at_res = train_at(family, optim, train_set, heldout);
  model::AtModel at(std::move(at_res.params));

  return nat_dev_nll(nat, heldout) - at_dev_nll(at, heldout);
}

namespace {

const std::map<std::string, TargetConfig::Method> kMethods = {
    {"raw", TargetConfig::Method::kRaw},
    {"kd", TargetConfig::Method::kKd},
    {"axe", TargetConfig::Method::kAxe},
    {"oaxe", TargetConfig::Method::kOaxe},
    {"dynamic_kd", TargetConfig::Method::kDynamicKd}};

const std::map<std::string, proxy::MaskRule::Kind> kRules = {
    {"vanilla", proxy::MaskRule::Kind::kVanilla},
    {"cmlm_uniform", proxy::MaskRule::Kind::kCmlmUniform},
    {"cmlm_fixed", proxy::MaskRule::Kind::kCmlmFixed},
    {"glat", proxy::MaskRule::Kind::kGlat},
    {"glat_levenshtein", proxy::MaskRule::Kind::kGlatLevenshtein},
    {"glat_pref", proxy::MaskRule::Kind::kGlatPref},
    {"glat_one_minus_pref", proxy::MaskRule::Kind::kGlatOneMinusPref}};

template <typename T>
std::string name_of(const std::map<std::string, T>& m, T v) {
  for (const auto& [k, mv] : m)
    if (mv == v) return k;
  throw std::invalid_argument("unknown enum value");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

NatTrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  NatTrainConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    std::string key, value;
    if (!(is >> key)) continue;
    if (!(is >> value))
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": key '" + key + "' without a value");
    try {
      if (key == "config_id") cfg.config_id = value;
      else if (key == "vocab") cfg.model.vocab = std::stoi(value);
      else if (key == "d_model") cfg.model.d_model = std::stoi(value);
      else if (key == "n_heads") cfg.model.n_heads = std::stoi(value);
      else if (key == "n_layers") cfg.model.n_layers = std::stoi(value);
      else if (key == "d_ffn") cfg.model.d_ffn = std::stoi(value);
      else if (key == "max_len") cfg.model.max_len = std::stoi(value);
      else if (key == "len_offset") cfg.model.len_offset = std::stoi(value);
      else if (key == "copy_mechanism") cfg.model.copy_mechanism = value == "1";
      else if (key == "target_method") cfg.target.method = kMethods.at(value);
      else if (key == "skip_penalty") cfg.target.skip_penalty = std::stod(value);
      else if (key == "pretrain_steps") cfg.target.pretrain_steps = std::stoi(value);
      else if (key == "beta") cfg.target.beta = std::stod(value);
      else if (key == "gamma") {
        for (const std::string& g : split_commas(value))
          cfg.target.gamma.push_back(std::stod(g));
      } else if (key == "teachers") {
        cfg.target.teacher_checkpoints = split_commas(value);
      } else if (key == "input_rule") cfg.input_rule.kind = kRules.at(value);
      else if (key == "fixed_ratio") cfg.input_rule.fixed_ratio = std::stod(value);
      else if (key == "lambda_start") cfg.input_rule.lambda_start = std::stod(value);
      else if (key == "lambda_end") cfg.input_rule.lambda_end = std::stod(value);
      else if (key == "anneal_steps") cfg.input_rule.anneal_steps = std::stoi(value);
      else if (key == "peak_lr") cfg.optim.peak_lr = std::stod(value);
      else if (key == "warmup") cfg.optim.warmup = std::stoi(value);
      else if (key == "steps") cfg.optim.steps = std::stoi(value);
      else if (key == "batch_size") cfg.optim.batch_size = std::stoi(value);
      else if (key == "label_smoothing") cfg.optim.label_smoothing = std::stod(value);
      else if (key == "eval_every") cfg.optim.eval_every = std::stoi(value);
      else if (key == "avg_k") cfg.optim.avg_k = std::stoi(value);
      else if (key == "seed") cfg.optim.seed = std::stoull(value);
      else
        throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": bad value '" + value + "' for '" + key + "'");
    }
  }
  if (cfg.optim.warmup > cfg.optim.steps)
    throw std::invalid_argument("config: warmup exceeds total steps");
  if (cfg.optim.avg_k < 1) throw std::invalid_argument("config: avg_k must be >= 1");
  return cfg;
}

void save_train_config(const NatTrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write config '" + path + "'");
  out << "config_id " << cfg.config_id << "\n";
  out << "vocab " << cfg.model.vocab << "\n";
  out << "d_model " << cfg.model.d_model << "\n";
  out << "n_heads " << cfg.model.n_heads << "\n";
  out << "n_layers " << cfg.model.n_layers << "\n";
  out << "d_ffn " << cfg.model.d_ffn << "\n";
  out << "max_len " << cfg.model.max_len << "\n";
  out << "len_offset " << cfg.model.len_offset << "\n";
  out << "copy_mechanism " << (cfg.model.copy_mechanism ? 1 : 0) << "\n";
  out << "target_method " << name_of(kMethods, cfg.target.method) << "\n";
  out << "skip_penalty " << cfg.target.skip_penalty << "\n";
  out << "pretrain_steps " << cfg.target.pretrain_steps << "\n";
  out << "beta " << cfg.target.beta << "\n";
  if (!cfg.target.gamma.empty()) {
    out << "gamma ";
    for (size_t i = 0; i < cfg.target.gamma.size(); ++i)
      out << (i ? "," : "") << cfg.target.gamma[i];
    out << "\n";
  }
  if (!cfg.target.teacher_checkpoints.empty()) {
    out << "teachers ";
    for (size_t i = 0; i < cfg.target.teacher_checkpoints.size(); ++i)
      out << (i ? "," : "") << cfg.target.teacher_checkpoints[i];
    out << "\n";
  }
  out << "input_rule " << name_of(kRules, cfg.input_rule.kind) << "\n";
  out << "fixed_ratio " << cfg.input_rule.fixed_ratio << "\n";
  out << "lambda_start " << cfg.input_rule.lambda_start << "\n";
  out << "lambda_end " << cfg.input_rule.lambda_end << "\n";
  out << "anneal_steps " << cfg.input_rule.anneal_steps << "\n";
  out << "peak_lr " << cfg.optim.peak_lr << "\n";
  out << "warmup " << cfg.optim.warmup << "\n";
  out << "steps " << cfg.optim.steps << "\n";
  out << "batch_size " << cfg.optim.batch_size << "\n";
  out << "label_smoothing " << cfg.optim.label_smoothing << "\n";
  out << "eval_every " << cfg.optim.eval_every << "\n";
  out << "avg_k " << cfg.optim.avg_k << "\n";
  out << "seed " << cfg.optim.seed << "\n";
}

}  // namespace natlab::train
