// natlab: command-line surface for the non-autoregressive sequence lab.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric abort (training
// divergence or too many failed pairs), 4 I/O error.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "natlab/data/corpus.hpp"
#include "natlab/decode/decode.hpp"
#include "natlab/metrics/bleu.hpp"
#include "natlab/metrics/enumerable.hpp"
#include "natlab/metrics/model_metrics.hpp"
#include "natlab/metrics/records.hpp"
#include "natlab/model/at_model.hpp"
#include "natlab/model/input_predictor.hpp"
#include "natlab/model/nat_model.hpp"
#include "natlab/proxy/target.hpp"
#include "natlab/train/train.hpp"

namespace fs = std::filesystem;
using namespace natlab;

namespace {

// ---------------------------------------------------------------- utilities

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Flat "key value" file with '#' comments, used by recipe configs.
std::map<std::string, std::string> read_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    std::string key, value;
    if (is >> key >> value) kv[key] = value;
  }
  return kv;
}

int geti(const std::map<std::string, std::string>& kv, const std::string& key,
         int fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stoi(it->second);
}

double getd(const std::map<std::string, std::string>& kv, const std::string& key,
            double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stod(it->second);
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const std::string& l : lines) out << l << "\n";
  if (!out) throw IoError("write failure on '" + path + "'");
}

// Fresh metrics log (recipes must be byte-reproducible, so no appending
// across runs).
void write_metrics(const std::string& path,
                   const std::vector<metrics::MetricsRecord>& rs) {
  std::error_code ec;
  fs::remove(path, ec);
  metrics::append_records(path, rs);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ------------------------------------------------------- recipe scaffolding

struct RecipeCtx {
  std::map<std::string, std::string> kv;
  uint64_t seed = 0;
  std::string out_dir;
  std::vector<metrics::MetricsRecord> records;
  std::vector<std::string> summary;

  void note(const std::string& line) {
    summary.push_back(line);
    std::printf("%s\n", line.c_str());
  }
  void finish() {
    fs::create_directories(out_dir);
    write_metrics(out_dir + "/metrics.jsonl", records);
    metrics::export_csv(out_dir + "/metrics.csv", records);
    write_lines(out_dir + "/summary.txt", summary);
  }
};

model::ModelConfig model_from_kv(const std::map<std::string, std::string>& kv,
                                 int vocab) {
  model::ModelConfig cfg;
  cfg.vocab = vocab;
  cfg.d_model = geti(kv, "d_model", 32);
  cfg.n_heads = geti(kv, "n_heads", 2);
  cfg.n_layers = geti(kv, "n_layers", 1);
  cfg.d_ffn = geti(kv, "d_ffn", 64);
  cfg.max_len = geti(kv, "max_len", 20);
  cfg.len_offset = geti(kv, "len_offset", 4);
  cfg.copy_mechanism = geti(kv, "copy_mechanism", 1) != 0;
  return cfg;
}

train::OptimConfig optim_from_kv(const std::map<std::string, std::string>& kv,
                                 uint64_t seed) {
  train::OptimConfig o;
  o.steps = geti(kv, "steps", 6000);
  o.warmup = geti(kv, "warmup", 300);
  o.peak_lr = getd(kv, "peak_lr", 3e-3);
  o.batch_size = geti(kv, "batch_size", 8);
  o.label_smoothing = getd(kv, "label_smoothing", 0.0);
  o.eval_every = geti(kv, "eval_every", 1500);
  o.avg_k = geti(kv, "avg_k", 2);
  o.seed = seed;
  return o;
}

// The multi-mode corpus shared by the fig4 / table2 / table3 / fig6 / fig7
// recipes. The `corpus` key picks the mode structure: "reversal" (the two
// modes of each source disagree at every position) or "shift" (the modes are
// one-position shifts of a common window, so aligned objectives apply).
struct Corpora {
  data::ParallelCorpus train, dev;
  data::EnumerableCond cond;
};

Corpora recipe_corpora(const RecipeCtx& ctx) {
  std::string kind = ctx.kv.count("corpus") ? ctx.kv.at("corpus") : "reversal";
  int sources = geti(ctx.kv, "sources", 12), len = geti(ctx.kv, "len", 6);
  int alphabet = geti(ctx.kv, "alphabet", 24);
  uint64_t sseed = ctx.seed + geti(ctx.kv, "spec_seed", 99);
  data::GeneratorSpec spec;
  if (kind == "reversal") spec = data::reversal_spec(sources, len, alphabet, sseed);
  else if (kind == "shift") spec = data::shift_spec(sources, len, alphabet, sseed);
  else throw std::invalid_argument("unknown corpus kind: " + kind);
  Corpora c;
  auto [train_c, cond] =
      data::gen_two_mode(spec, geti(ctx.kv, "train_pairs", 360),
                         ctx.seed + geti(ctx.kv, "corpus_seed", 7));
  auto [dev_c, dcond] = data::gen_two_mode(spec, geti(ctx.kv, "dev_pairs", 48),
                                           ctx.seed + geti(ctx.kv, "dev_seed", 8));
  data::attach_references(dev_c, geti(ctx.kv, "refs", 4),
                          ctx.seed + geti(ctx.kv, "refs_seed", 21));
  c.train = std::move(train_c);
  c.dev = std::move(dev_c);
  c.cond = std::move(cond);
  return c;
}

std::string train_teacher(const RecipeCtx& ctx, const model::ModelConfig& cfg,
                          const Corpora& c, int steps, const std::string& tag) {
  train::OptimConfig opt = optim_from_kv(ctx.kv, ctx.seed);
  opt.steps = steps;
  opt.warmup = std::min(opt.warmup, steps / 2);
  opt.eval_every = std::max(1, steps / 4);
  train::AtTrainResult at = train::train_at(cfg, opt, c.train, c.dev);
  std::string dir = ctx.out_dir + "/teacher-" + tag;
  fs::create_directories(dir);
  model::save_checkpoint(at.params, dir);
  return dir;
}

// ----------------------------------------------------------------- recipes

// Random enumerable toys vs product-form models: the KL of any product model
// is bounded below by the conditional total correlation, with equality for
// the marginal-matching construction.
void recipe_theorem1(RecipeCtx& ctx) {
  int toys = geti(ctx.kv, "toys", 50);
  int models = geti(ctx.kv, "models_per_toy", 200);
  int max_len = geti(ctx.kv, "max_len", 3);
  int max_vocab = geti(ctx.kv, "max_vocab", 8);
  util::Rng rng(ctx.seed);
  double worst_gap = 0.0, worst_eq = 0.0;
  for (int t = 0; t < toys; ++t) {
    int len = rng.uniform_int(1, max_len);
    int vocab = rng.uniform_int(2, max_vocab);
    int support = rng.uniform_int(2, 6);
    std::map<data::TokenSeq, double> dist_map;
    double total = 0.0;
    for (int s = 0; s < support; ++s) {
      data::TokenSeq seq(len);
      for (int& v : seq) v = data::kFirstToken + rng.uniform_int(0, vocab - 1);
      double w = rng.uniform() + 1e-3;
      dist_map[seq] += w;
      total += w;
    }
    std::vector<std::pair<data::TokenSeq, double>> dist;
    for (auto& [seq, w] : dist_map) dist.emplace_back(seq, w / total);
    data::EnumerableCond cond;
    cond.by_source[{data::kFirstToken}] = dist;
    double tc = metrics::exact_tc(cond).bits_per_sentence;

    double min_kl = std::numeric_limits<double>::infinity();
    for (int m = 0; m < models; ++m) {
      std::vector<std::vector<double>> pos(
          len, std::vector<double>(data::kFirstToken + vocab));
      for (auto& row : pos) {
        double z = 0.0;
        for (double& p : row) z += (p = rng.uniform() + 1e-6);
        for (double& p : row) p /= z;
      }
      min_kl = std::min(min_kl, metrics::exact_kl(dist, pos));
    }
    std::vector<std::vector<double>> marg(
        len, std::vector<double>(data::kFirstToken + vocab, 0.0));
    for (const auto& [seq, p] : dist)
      for (int i = 0; i < len; ++i) marg[i][seq[i]] += p;
    double eq_kl = metrics::exact_kl(dist, marg);
    worst_gap = std::max(worst_gap, tc - min_kl);
    worst_eq = std::max(worst_eq, std::abs(eq_kl - tc));

    metrics::MetricsRecord r;
    r.config_id = "toy-" + std::to_string(t);
    r.seed = ctx.seed;
    r.l_nat = min_kl;        // best product-model KL found by random search
    r.c_hat = tc;            // the exact lower bound
    r.l_input = eq_kl - tc;  // equality-construction residual
    r.finalize();
    ctx.records.push_back(r);
  }
  ctx.note("toys=" + std::to_string(toys) + " models_per_toy=" + std::to_string(models));
  ctx.note("max (exact_tc - min exact_kl) over toys = " + fmt(worst_gap) +
           "  (bound requires <= 0 up to 1e-9)");
  ctx.note("max |exact_kl(marginal model) - exact_tc| = " + fmt(worst_eq));
}

// Two-mode 50/50 toy: a vanilla NAT converges to the total-correlation KL
// floor and mixes modes; a KD-trained NAT collapses to the teacher's mode.
void recipe_fig2(RecipeCtx& ctx) {
  auto spec = data::two_mode_toy_spec();
  auto [corpus, cond] = data::gen_two_mode(spec, geti(ctx.kv, "pairs", 200),
                                           ctx.seed + geti(ctx.kv, "corpus_seed", 42));
  model::ModelConfig cfg = model_from_kv(ctx.kv, corpus.vocab_size());
  cfg.max_len = geti(ctx.kv, "max_len", 16);
  cfg.copy_mechanism = false;

  const data::TokenSeq x = spec.sources[0].first;
  const data::TokenSeq a = spec.sources[0].second[0].seq;
  const data::TokenSeq b = spec.sources[0].second[1].seq;
  double tc = metrics::exact_tc(cond).bits_per_sentence;

  auto enumerate = [&](const model::NatModel& nat, const char* id) {
    auto d = nat.position_dists(x, {data::kMask, data::kMask});
    double kl = metrics::exact_kl(cond.by_source.at(x), d);
    double p_a = d[0][a[0]] * d[1][a[1]], p_b = d[0][b[0]] * d[1][b[1]];
    double mix = d[0][a[0]] * d[1][b[1]] + d[0][b[0]] * d[1][a[1]];
    ctx.note(std::string(id) + ": P(mode1)=" + fmt(p_a) + " P(mode2)=" + fmt(p_b) +
             " P(mode-mixing)=" + fmt(mix) + " exact_kl=" + fmt(kl) +
             " exact_tc=" + fmt(tc) + " gap=" + fmt(kl - tc));
    metrics::MetricsRecord r;
    r.config_id = id;
    r.seed = ctx.seed;
    r.step = geti(ctx.kv, "steps", 3000);
    r.l_nat = kl;
    r.c_hat = tc;
    r.l_input = mix;  // mode-mixing probability mass
    r.finalize();
    ctx.records.push_back(r);
  };

  train::NatTrainConfig nc;
  nc.config_id = "raw";
  nc.model = cfg;
  nc.optim = optim_from_kv(ctx.kv, ctx.seed);
  nc.optim.steps = geti(ctx.kv, "steps", 3000);
  nc.optim.eval_every = std::max(1, nc.optim.steps / 4);
  nc.optim.avg_k = 1;
  train::NatTrainResult raw = train::train_nat(nc, corpus, corpus);
  model::NatModel raw_nat(std::move(raw.params));
  enumerate(raw_nat, "raw");

  Corpora c{corpus, corpus, cond};
  std::string teacher =
      train_teacher(ctx, cfg, c, geti(ctx.kv, "teacher_steps", 1500), "kd");
  nc.config_id = "kd";
  nc.target.method = train::TargetConfig::Method::kKd;
  nc.target.teacher_checkpoints = {teacher};
  train::NatTrainResult kd = train::train_nat(nc, corpus, corpus);
  model::NatModel kd_nat(std::move(kd.params));
  enumerate(kd_nat, "kd");
}

struct GridEntry {
  std::string id;
  train::TargetConfig::Method method;
  proxy::MaskRule::Kind input;
  double skip_penalty = 1.0;
};

// Train a grid of configs on the recipe corpus and evaluate full records.
std::vector<metrics::MetricsRecord> run_grid(RecipeCtx& ctx, const Corpora& c,
                                             const std::vector<GridEntry>& grid,
                                             const std::string& teacher,
                                             double beta) {
  model::ModelConfig cfg = model_from_kv(ctx.kv, c.train.vocab_size());
  std::vector<metrics::MetricsRecord> recs;
  for (const GridEntry& g : grid) {
    train::NatTrainConfig nc;
    nc.config_id = g.id;
    nc.model = cfg;
    nc.optim = optim_from_kv(ctx.kv, ctx.seed);
    nc.target.method = g.method;
    nc.target.skip_penalty = g.skip_penalty;
    if (g.method == train::TargetConfig::Method::kKd)
      nc.target.teacher_checkpoints = {teacher};
    if (g.method == train::TargetConfig::Method::kOaxe)
      nc.target.pretrain_steps = geti(ctx.kv, "oaxe_pretrain", 1000);
    nc.input_rule.kind = g.input;
    nc.input_rule.anneal_steps = nc.optim.steps;
    train::NatTrainResult res = train::train_nat(nc, c.train, c.dev);
    model::NatModel nat(std::move(res.params));
    train::EvalOptions eo;
    eo.beta = beta;
    eo.seed = ctx.seed + 5;
    metrics::MetricsRecord r = train::evaluate_config(nc, nat, c.dev, eo);
    recs.push_back(r);
    std::string dir = ctx.out_dir + "/nat-" + g.id;
    fs::create_directories(dir);
    model::save_checkpoint(nat.params(), dir);
    ctx.note(g.id + ": l_nat=" + fmt(r.l_nat) + " l_input=" + fmt(r.l_input) +
             " l_target_hat=" + fmt(r.l_target_hat) + " l_mple=" + fmt(r.l_mple) +
             " bleu=" + fmt(r.bleu));
  }
  return recs;
}

// Re-evaluate only the target term at another paraphraser sharpness and
// report the Pearson correlation between the objective and dev BLEU.
void report_correlations(RecipeCtx& ctx, const Corpora& c,
                         const std::vector<GridEntry>& grid,
                         const std::string& teacher,
                         std::vector<metrics::MetricsRecord>& recs) {
  std::vector<double> betas = {0.1, 0.2, 0.5};
  std::vector<double> bleus;
  for (const metrics::MetricsRecord& r : recs) bleus.push_back(r.bleu);
  model::ModelConfig cfg = model_from_kv(ctx.kv, c.train.vocab_size());
  for (double beta : betas) {
    std::vector<double> mples;
    for (size_t i = 0; i < grid.size(); ++i) {
      train::NatTrainConfig nc;
      nc.config_id = grid[i].id;
      nc.model = cfg;
      nc.optim = optim_from_kv(ctx.kv, ctx.seed);
      nc.target.method = grid[i].method;
      nc.target.skip_penalty = grid[i].skip_penalty;
      if (grid[i].method == train::TargetConfig::Method::kKd)
        nc.target.teacher_checkpoints = {teacher};
      nc.input_rule.kind = grid[i].input;
      nc.input_rule.anneal_steps = nc.optim.steps;
      model::NatModel nat(model::load_checkpoint(ctx.out_dir + "/nat-" + grid[i].id));
      train::EvalOptions eo;
      eo.beta = beta;
      eo.seed = ctx.seed + 5;
      metrics::MetricsRecord r = train::evaluate_config(nc, nat, c.dev, eo);
      mples.push_back(r.l_mple);
    }
    double r = metrics::pearson(mples, bleus);
    ctx.note("pearson(l_mple, bleu) at beta=" + fmt(beta) + ": " + fmt(r));
  }
}

void recipe_fig4(RecipeCtx& ctx) {
  Corpora c = recipe_corpora(ctx);
  model::ModelConfig cfg = model_from_kv(ctx.kv, c.train.vocab_size());
  std::string teacher =
      train_teacher(ctx, cfg, c, geti(ctx.kv, "teacher_steps", 4000), "kd");

  train::OptimConfig tc_opt = optim_from_kv(ctx.kv, ctx.seed);
  tc_opt.steps = geti(ctx.kv, "tc_steps", 4000);
  double c_hat = train::estimate_tc(cfg, tc_opt, c.train, c.dev);
  double tc_true = metrics::exact_tc(c.cond).bits_per_token;
  ctx.note("c_hat=" + fmt(c_hat) + " bits/token (exact " + fmt(tc_true) + ")");

  using M = train::TargetConfig::Method;
  using K = proxy::MaskRule::Kind;
  std::vector<GridEntry> grid = {
      {"raw+vanilla", M::kRaw, K::kVanilla},   {"kd+vanilla", M::kKd, K::kVanilla},
      {"axe+vanilla", M::kAxe, K::kVanilla},   {"oaxe+vanilla", M::kOaxe, K::kVanilla},
      {"raw+glat", M::kRaw, K::kGlat},
  };
  std::vector<metrics::MetricsRecord> recs =
      run_grid(ctx, c, grid, teacher, getd(ctx.kv, "beta", 0.2));
  for (metrics::MetricsRecord& r : recs) {
    r.c_hat = c_hat;
    ctx.note(r.config_id + ": l_nat " + fmt(r.l_nat) +
             (r.l_nat < c_hat ? " < " : " >= ") + "c_hat " + fmt(c_hat));
    ctx.records.push_back(r);
  }
}

void recipe_table(RecipeCtx& ctx, bool targets) {
  Corpora c = recipe_corpora(ctx);
  model::ModelConfig cfg = model_from_kv(ctx.kv, c.train.vocab_size());
  std::string teacher =
      train_teacher(ctx, cfg, c, geti(ctx.kv, "teacher_steps", 4000), "kd");
  using M = train::TargetConfig::Method;
  using K = proxy::MaskRule::Kind;
  std::vector<GridEntry> grid;
  if (targets) {
    grid = {{"raw", M::kRaw, K::kVanilla},
            {"kd", M::kKd, K::kVanilla},
            {"axe-d1", M::kAxe, K::kVanilla, 1.0},
            {"axe-d5", M::kAxe, K::kVanilla, 5.0},
            {"oaxe", M::kOaxe, K::kVanilla},
            {"raw+cmlm-fixed", M::kRaw, K::kCmlmFixed},
            {"kd+cmlm", M::kKd, K::kCmlmUniform}};
  } else {
    grid = {{"vanilla", M::kRaw, K::kVanilla},
            {"cmlm-uniform", M::kRaw, K::kCmlmUniform},
            {"cmlm-fixed", M::kRaw, K::kCmlmFixed},
            {"glat", M::kRaw, K::kGlat},
            {"glat-lev", M::kRaw, K::kGlatLevenshtein},
            {"glat-pref", M::kRaw, K::kGlatPref}};
  }
  std::vector<metrics::MetricsRecord> recs =
      run_grid(ctx, c, grid, teacher, getd(ctx.kv, "beta", 0.2));
  ctx.records = recs;
  // The input grid's glancing configs have an L_input dominated by posterior
  // mismatch, so the objective-vs-BLEU correlation is only reported for the
  // target grid.
  if (targets) report_correlations(ctx, c, grid, teacher, recs);
}

// Trained CMLM decoded with the default full mask vs Input Sampling.
void recipe_fig6(RecipeCtx& ctx) {
  Corpora c = recipe_corpora(ctx);
  model::ModelConfig cfg = model_from_kv(ctx.kv, c.train.vocab_size());
  train::NatTrainConfig nc;
  nc.config_id = "cmlm";
  nc.model = cfg;
  nc.optim = optim_from_kv(ctx.kv, ctx.seed);
  nc.input_rule.kind = proxy::MaskRule::Kind::kCmlmUniform;
  train::NatTrainResult res = train::train_nat(nc, c.train, c.dev);
  model::NatModel nat(std::move(res.params));
  model::InputPredictor ip(&nat);

  for (auto strategy : {decode::Strategy::kDefault, decode::Strategy::kInputSampling}) {
    bool is = strategy == decode::Strategy::kInputSampling;
    decode::DecodeOptions opts;
    opts.strategy = strategy;
    util::Rng rng(ctx.seed + 5);
    double bleu = 0.0, conf = 0.0;
    for (const auto& [x, y] : c.dev.pairs) {
      decode::DecodeResult r = decode::decode(nat, ip, x, opts, rng);
      bleu += 100.0 * metrics::sentence_bleu(y, r.tokens);
      conf += r.confidence;
    }
    bleu /= static_cast<double>(c.dev.pairs.size());
    conf /= static_cast<double>(c.dev.pairs.size());
    metrics::MetricsRecord r;
    r.config_id = is ? "input_sampling" : "default";
    r.seed = ctx.seed;
    r.step = nc.optim.steps;
    r.bleu = bleu;
    r.confidence = conf;
    r.finalize();
    ctx.records.push_back(r);
    ctx.note(r.config_id + ": bleu=" + fmt(bleu) + " confidence=" + fmt(conf));
  }
  ctx.note("margin=" + fmt(ctx.records[1].bleu - ctx.records[0].bleu) +
           " (input_sampling - default)");
}

void recipe_fig7(RecipeCtx& ctx) {
  Corpora c = recipe_corpora(ctx);
  model::ModelConfig cfg = model_from_kv(ctx.kv, c.train.vocab_size());
  std::string weak =
      train_teacher(ctx, cfg, c, geti(ctx.kv, "weak_teacher_steps", 500), "weak");
  std::string strong =
      train_teacher(ctx, cfg, c, geti(ctx.kv, "teacher_steps", 4000), "strong");

  auto run = [&](const std::string& id, const train::TargetConfig& tgt) {
    train::NatTrainConfig nc;
    nc.config_id = id;
    nc.model = cfg;
    nc.optim = optim_from_kv(ctx.kv, ctx.seed);
    nc.target = tgt;
    nc.input_rule.kind = proxy::MaskRule::Kind::kVanilla;
    train::NatTrainResult res = train::train_nat(nc, c.train, c.dev);
    model::NatModel nat(std::move(res.params));
    metrics::MetricsRecord r;
    r.config_id = id;
    r.seed = ctx.seed;
    r.step = nc.optim.steps;
    r.bleu = train::dev_bleu(nat, c.dev, ctx.seed + 5);
    r.finalize();
    ctx.records.push_back(r);
    std::string gammas;
    for (double g : res.gamma) gammas += (gammas.empty() ? "" : ",") + fmt(g);
    ctx.note(id + ": bleu=" + fmt(r.bleu) +
             (gammas.empty() ? "" : " gamma=" + gammas));
    return r.bleu;
  };

  train::TargetConfig kd;
  kd.method = train::TargetConfig::Method::kKd;
  kd.teacher_checkpoints = {weak};
  double bw = run("kd-weak", kd);
  kd.teacher_checkpoints = {strong};
  double bs = run("kd-strong", kd);

  train::TargetConfig dyn;
  dyn.method = train::TargetConfig::Method::kDynamicKd;
  dyn.teacher_checkpoints = {weak, strong};
  dyn.beta = getd(ctx.kv, "beta", 0.2);
  double bd = run("dynamic-kd", dyn);
  dyn.beta = 0.0;
  dyn.gamma = {1.0, 1.0, 1.0};
  double b0 = run("dynamic-kd-beta0", dyn);

  double best = std::max(bw, bs);
  ctx.note("best single tier=" + fmt(best) + " dynamic=" + fmt(bd) +
           " (target >= best - 0.3), beta0 ablation=" + fmt(b0));
}

// ------------------------------------------------------- plain subcommands

struct GenDataArgs {
  std::string mode = "two-mode", corpus = "reversal", out;
  int pairs = 200, sources = 0, len = 6, alphabet = 24;
  int tokens = 8, len_min = 3, len_max = 8, refs = 0;
  double replace_rate = 0.2, drop_rate = 0.1;
  uint64_t seed = 1, spec_seed = 99, refs_seed = 21;
};

void cmd_gen_data(const GenDataArgs& a) {
  data::GeneratorSpec spec;
  data::ParallelCorpus corpus;
  if (a.mode == "two-mode") {
    if (a.sources <= 0) spec = data::two_mode_toy_spec();
    else if (a.corpus == "reversal")
      spec = data::reversal_spec(a.sources, a.len, a.alphabet, a.spec_seed);
    else if (a.corpus == "shift")
      spec = data::shift_spec(a.sources, a.len, a.alphabet, a.spec_seed);
    else
      throw std::invalid_argument("gen-data corpus must be reversal or shift");
    corpus = data::gen_two_mode(spec, a.pairs, a.seed).first;
  } else if (a.mode == "synthetic") {
    spec.kind = data::GeneratorSpec::Kind::MarkovCorruption;
    spec.num_tokens = a.tokens;
    spec.len_min = a.len_min;
    spec.len_max = a.len_max;
    spec.replace_rate = a.replace_rate;
    spec.drop_rate = a.drop_rate;
    spec.init_dist.assign(a.tokens, 1.0 / a.tokens);
    // ring-biased chain so neighbouring tokens carry information
    spec.trans.assign(a.tokens, std::vector<double>(a.tokens, 1.0));
    for (int i = 0; i < a.tokens; ++i) spec.trans[i][(i + 1) % a.tokens] += 3.0;
    for (auto& row : spec.trans) {
      double z = 0.0;
      for (double v : row) z += v;
      for (double& v : row) v /= z;
    }
    corpus = data::gen_synthetic(spec, a.pairs, a.seed);
  } else {
    throw std::invalid_argument("gen-data kind must be two-mode or synthetic");
  }
  if (a.refs > 0) data::attach_references(corpus, a.refs, a.refs_seed);
  data::save_corpus(corpus, a.out);
  std::printf("wrote %zu pairs (vocab %d) to %s\n", corpus.pairs.size(),
              corpus.vocab_size(), a.out.c_str());
}

void cmd_train_at(const std::string& config, const std::string& train_path,
                  const std::string& dev_path, const std::string& out) {
  train::NatTrainConfig cfg = train::load_train_config(config);
  data::ParallelCorpus train_c = data::load_corpus(train_path);
  data::ParallelCorpus dev_c = data::load_corpus(dev_path);
  if (cfg.model.vocab == 0) cfg.model.vocab = train_c.vocab_size();
  train::AtTrainResult res = train::train_at(cfg.model, cfg.optim, train_c, dev_c);
  fs::create_directories(out);
  model::save_checkpoint(res.params, out);
  std::printf("teacher saved to %s (final dev nll %.4f bits/token)\n", out.c_str(),
              res.dev_nll.back());
}

void cmd_distill(const std::string& teacher, const std::string& in,
                 const std::string& out, int beam) {
  model::AtModel at(model::load_checkpoint(teacher));
  data::ParallelCorpus corpus = data::load_corpus(in);
  int dropped = 0;
  std::map<data::TokenSeq, data::TokenSeq> cache;
  data::ParallelCorpus distilled = corpus;
  distilled.pairs.clear();
  for (const auto& [x, y] : corpus.pairs) {
    auto it = cache.find(x);
    if (it == cache.end())
      it = cache.emplace(x, model::beam_search(at, x, beam).tokens).first;
    if (it->second.empty()) {
      ++dropped;
      continue;
    }
    distilled.pairs.emplace_back(x, it->second);
  }
  if (distilled.pairs.empty())
    throw train::NumericError("distillation produced no usable pairs");
  data::save_corpus(distilled, out);
  std::printf("distilled %zu pairs to %s (%d dropped)\n", distilled.pairs.size(),
              out.c_str(), dropped);
}

void cmd_train_nat(const std::string& config, const std::string& train_path,
                   const std::string& dev_path, const std::string& out,
                   const std::string& metrics_path) {
  train::NatTrainConfig cfg = train::load_train_config(config);
  data::ParallelCorpus train_c = data::load_corpus(train_path);
  data::ParallelCorpus dev_c = data::load_corpus(dev_path);
  if (cfg.model.vocab == 0) cfg.model.vocab = train_c.vocab_size();
  train::NatTrainResult res = train::train_nat(cfg, train_c, dev_c);
  fs::create_directories(out);
  model::save_checkpoint(res.params, out);
  if (!metrics_path.empty()) metrics::append_records(metrics_path, res.records);
  std::printf("model saved to %s (final dev bleu %.2f, %d pairs skipped)\n",
              out.c_str(), res.records.back().bleu, res.skipped);
}

void cmd_decode(const std::string& model_dir, const std::string& in,
                const std::string& out, const std::string& strategy, int lpd_n,
                bool dedup, double length_factor, uint64_t seed) {
  model::NatModel nat(model::load_checkpoint(model_dir));
  model::InputPredictor ip(&nat);
  data::ParallelCorpus corpus = data::load_corpus(in);
  decode::DecodeOptions opts;
  if (strategy == "input_sampling")
    opts.strategy = decode::Strategy::kInputSampling;
  else if (strategy != "default")
    throw std::invalid_argument("strategy must be default or input_sampling");
  opts.dedup = dedup;
  opts.length_factor = length_factor;
  util::Rng rng(seed);
  std::vector<std::string> lines;
  for (const auto& [x, y] : corpus.pairs) {
    decode::DecodeResult r = lpd_n > 1 ? decode::lpd(nat, ip, x, lpd_n, opts, rng)
                                       : decode::decode(nat, ip, x, opts, rng);
    lines.push_back(data::seq_to_text(r.tokens));
  }
  write_lines(out, lines);
  std::printf("decoded %zu sources to %s\n", lines.size(), out.c_str());
}

void cmd_evaluate(const std::string& config, const std::string& model_dir,
                  const std::string& dev_path, double beta, uint64_t seed,
                  const std::string& metrics_path) {
  train::NatTrainConfig cfg = train::load_train_config(config);
  model::NatModel nat(model::load_checkpoint(model_dir));
  data::ParallelCorpus dev_c = data::load_corpus(dev_path);
  train::EvalOptions eo;
  eo.beta = beta;
  eo.seed = seed;
  metrics::MetricsRecord r = train::evaluate_config(cfg, nat, dev_c, eo);
  std::printf("%s\n", metrics::to_json_line(r).c_str());
  if (!metrics_path.empty()) metrics::append_records(metrics_path, {r});
}

void cmd_estimate_tc(const std::string& config, const std::string& train_path,
                     const std::string& dev_path) {
  train::NatTrainConfig cfg = train::load_train_config(config);
  data::ParallelCorpus train_c = data::load_corpus(train_path);
  data::ParallelCorpus dev_c = data::load_corpus(dev_path);
  if (cfg.model.vocab == 0) cfg.model.vocab = train_c.vocab_size();
  double c_hat = train::estimate_tc(cfg.model, cfg.optim, train_c, dev_c);
  std::printf("c_hat %.6f bits/token\n", c_hat);
}

void cmd_correlate(const std::vector<std::string>& configs,
                   const std::vector<std::string>& models,
                   const std::string& dev_path, const std::vector<double>& betas,
                   uint64_t seed, const std::string& metrics_path) {
  if (configs.size() != models.size() || configs.size() < 4)
    throw std::invalid_argument("correlate needs >= 4 matching --config/--model pairs");
  data::ParallelCorpus dev_c = data::load_corpus(dev_path);
  std::vector<metrics::MetricsRecord> all;
  for (double beta : betas) {
    std::vector<double> mples, bleus;
    for (size_t i = 0; i < configs.size(); ++i) {
      train::NatTrainConfig cfg = train::load_train_config(configs[i]);
      model::NatModel nat(model::load_checkpoint(models[i]));
      train::EvalOptions eo;
      eo.beta = beta;
      eo.seed = seed;
      metrics::MetricsRecord r = train::evaluate_config(cfg, nat, dev_c, eo);
      std::printf("%s\n", metrics::to_json_line(r).c_str());
      all.push_back(r);
      mples.push_back(r.l_mple);
      bleus.push_back(r.bleu);
    }
    std::printf("pearson(l_mple, bleu) at beta=%.3f: %.4f\n", beta,
                metrics::pearson(mples, bleus));
  }
  if (!metrics_path.empty()) metrics::append_records(metrics_path, all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"natlab: a desk-scale laboratory for non-autoregressive sequence learning"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "cap on worker threads")->check(CLI::PositiveNumber);

  GenDataArgs gd;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("kind", gd.mode, "two-mode | synthetic")->required();
  gen->add_option("--out", gd.out)->required();
  gen->add_option("--pairs", gd.pairs);
  gen->add_option("--seed", gd.seed);
  gen->add_option("--sources", gd.sources, "two-mode: >0 selects a multi-source corpus");
  gen->add_option("--corpus", gd.corpus, "two-mode structure: reversal or shift");
  gen->add_option("--len", gd.len);
  gen->add_option("--alphabet", gd.alphabet);
  gen->add_option("--spec-seed", gd.spec_seed);
  gen->add_option("--tokens", gd.tokens, "synthetic: Markov alphabet size");
  gen->add_option("--len-min", gd.len_min);
  gen->add_option("--len-max", gd.len_max);
  gen->add_option("--replace-rate", gd.replace_rate);
  gen->add_option("--drop-rate", gd.drop_rate);
  gen->add_option("--refs", gd.refs, "attach k references per source");
  gen->add_option("--refs-seed", gd.refs_seed);

  std::string config, train_path, dev_path, out, metrics_path, model_dir, teacher, in;
  CLI::App* tat = app.add_subcommand("train-at", "train an autoregressive teacher");
  tat->add_option("--config", config)->required();
  tat->add_option("--train", train_path)->required();
  tat->add_option("--dev", dev_path)->required();
  tat->add_option("--out", out)->required();

  int beam = 5;
  CLI::App* dis = app.add_subcommand("distill", "replace targets with teacher beam output");
  dis->add_option("--teacher", teacher)->required();
  dis->add_option("--in", in)->required();
  dis->add_option("--out", out)->required();
  dis->add_option("--beam", beam);

  CLI::App* tnat = app.add_subcommand("train-nat", "train a non-autoregressive model");
  tnat->add_option("--config", config)->required();
  tnat->add_option("--train", train_path)->required();
  tnat->add_option("--dev", dev_path)->required();
  tnat->add_option("--out", out)->required();
  tnat->add_option("--metrics", metrics_path);

  std::string strategy = "default";
  int lpd_n = 1;
  bool dedup = false;
  double length_factor = 1.0;
  uint64_t seed = 1;
  CLI::App* dec = app.add_subcommand("decode", "decode a corpus's sources");
  dec->add_option("--model", model_dir)->required();
  dec->add_option("--in", in)->required();
  dec->add_option("--out", out)->required();
  dec->add_option("--strategy", strategy, "default | input_sampling");
  dec->add_option("--lpd", lpd_n, "odd candidate count for length-parallel decoding");
  dec->add_flag("--dedup", dedup, "collapse adjacent repeated tokens");
  dec->add_option("--length-factor", length_factor);
  dec->add_option("--seed", seed);

  double beta = 0.2;
  CLI::App* ev = app.add_subcommand("evaluate", "full metrics row for a trained model");
  ev->add_option("--config", config)->required();
  ev->add_option("--model", model_dir)->required();
  ev->add_option("--dev", dev_path)->required();
  ev->add_option("--beta", beta);
  ev->add_option("--seed", seed);
  ev->add_option("--metrics", metrics_path);

  CLI::App* tc = app.add_subcommand("estimate-tc",
                                    "V-entropy estimate of the conditional total correlation");
  tc->add_option("--config", config)->required();
  tc->add_option("--train", train_path)->required();
  tc->add_option("--dev", dev_path)->required();

  std::vector<std::string> cor_configs, cor_models;
  std::vector<double> cor_betas = {0.2};
  CLI::App* cor = app.add_subcommand("correlate", "objective-vs-BLEU correlation grid");
  cor->add_option("--config", cor_configs)->required();
  cor->add_option("--model", cor_models)->required();
  cor->add_option("--dev", dev_path)->required();
  cor->add_option("--beta", cor_betas);
  cor->add_option("--seed", seed);
  cor->add_option("--metrics", metrics_path);

  std::string recipe, recipe_cfg, recipe_out;
  uint64_t recipe_seed = 0;
  CLI::App* rep = app.add_subcommand("reproduce", "run a built-in experiment recipe");
  rep->add_option("recipe", recipe,
                  "theorem1 | fig2-multimodality | fig4-lnat-below-c | "
                  "table2-proxy-targets | table3-proxy-inputs | fig6-confidence | "
                  "fig7-dynamic-kd")
      ->required();
  rep->add_option("--config", recipe_cfg, "defaults to configs/<recipe>.cfg");
  rep->add_option("--out", recipe_out, "defaults to out/<recipe>");
  CLI::Option* seed_opt = rep->add_option("--seed", recipe_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) cmd_gen_data(gd);
    if (*tat) cmd_train_at(config, train_path, dev_path, out);
    if (*dis) cmd_distill(teacher, in, out, beam);
    if (*tnat) cmd_train_nat(config, train_path, dev_path, out, metrics_path);
    if (*dec) cmd_decode(model_dir, in, out, strategy, lpd_n, dedup, length_factor, seed);
    if (*ev) cmd_evaluate(config, model_dir, dev_path, beta, seed, metrics_path);
    if (*tc) cmd_estimate_tc(config, train_path, dev_path);
    if (*cor) cmd_correlate(cor_configs, cor_models, dev_path, cor_betas, seed, metrics_path);
    if (*rep) {
      RecipeCtx ctx;
      ctx.kv = read_kv(recipe_cfg.empty() ? "configs/" + recipe + ".cfg" : recipe_cfg);
      ctx.seed = seed_opt->count() ? recipe_seed
                                   : static_cast<uint64_t>(geti(ctx.kv, "seed", 1));
      ctx.out_dir = recipe_out.empty() ? "out/" + recipe : recipe_out;
      fs::create_directories(ctx.out_dir);
      if (recipe == "theorem1") recipe_theorem1(ctx);
      else if (recipe == "fig2-multimodality") recipe_fig2(ctx);
      else if (recipe == "fig4-lnat-below-c") recipe_fig4(ctx);
      else if (recipe == "table2-proxy-targets") recipe_table(ctx, true);
      else if (recipe == "table3-proxy-inputs") recipe_table(ctx, false);
      else if (recipe == "fig6-confidence") recipe_fig6(ctx);
      else if (recipe == "fig7-dynamic-kd") recipe_fig7(ctx);
      else {
        std::fprintf(stderr, "unknown recipe '%s'\n%s\n", recipe.c_str(),
                     rep->help().c_str());
        return 2;
      }
      ctx.finish();
    }
  } catch (const train::NumericError& e) {
    std::fprintf(stderr, "numeric abort: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const data::CorpusError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  }
  return 0;
}
