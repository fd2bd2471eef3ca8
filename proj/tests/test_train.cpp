#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "natlab/train/train.hpp"

using namespace natlab;
using data::TokenSeq;

namespace {

model::ModelConfig tiny_cfg() {
  model::ModelConfig cfg;
  cfg.vocab = 16;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.d_ffn = 32;
  return cfg;
}

// Deterministic copy-style corpus: each source maps to one fixed target.
data::ParallelCorpus tiny_corpus() {
  data::GeneratorSpec spec;
  spec.kind = data::GeneratorSpec::Kind::TwoMode;
  spec.sources = {
      {{5, 6, 7}, {{{6, 7, 8}, 1.0}}},
      {{7, 8}, {{{8, 9}, 1.0}}},
      {{9, 10, 5}, {{{10, 5, 6}, 1.0}}},
      {{6, 9}, {{{7, 10}, 1.0}}},
  };
  auto [corpus, cond] = data::gen_two_mode(spec, 24, 77);
  (void)cond;
  return corpus;
}

train::OptimConfig fast_optim() {
  train::OptimConfig o;
  o.steps = 30;
  o.warmup = 10;
  o.batch_size = 4;
  o.eval_every = 10;
  o.avg_k = 2;
  o.label_smoothing = 0.0;
  o.seed = 3;
  return o;
}

}  // namespace

TEST_CASE("learning rate schedule: linear warmup then inverse sqrt decay") {
  train::OptimConfig o;
  o.peak_lr = 2e-3;
  o.warmup = 400;
  CHECK(train::lr_at(o, 400) == doctest::Approx(2e-3));
  CHECK(train::lr_at(o, 200) == doctest::Approx(1e-3));
  CHECK(train::lr_at(o, 1600) == doctest::Approx(1e-3));
  CHECK(train::lr_at(o, 1) > 0.0);
}

TEST_CASE("adam first step moves a unit-gradient scalar by about lr") {
  model::ParamStore ps;
  ps.add_const("w", compute::Tensor({1, 1}));
  train::Adam adam(ps);
  ps.at("w").grad.v[0] = 1.0;
  adam.step(1e-2);
  // bias-corrected m-hat = g, v-hat = g^2, so the update is lr/(1+eps') ~ lr
  CHECK(ps.at("w").value.v[0] == doctest::Approx(-1e-2).epsilon(1e-3));
}

TEST_CASE("train config round trips through the flat key-value format") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "natlab_test_cfg.txt";
  train::NatTrainConfig cfg;
  cfg.config_id = "demo";
  cfg.model = tiny_cfg();
  cfg.target.method = train::TargetConfig::Method::kDynamicKd;
  cfg.target.beta = 0.5;
  cfg.target.gamma = {1.0, 2.0};
  cfg.target.teacher_checkpoints = {"a/dir", "b/dir"};
  cfg.input_rule.kind = proxy::MaskRule::Kind::kGlat;
  cfg.input_rule.anneal_steps = 123;
  cfg.optim = fast_optim();
  train::save_train_config(cfg, path.string());
  train::NatTrainConfig back = train::load_train_config(path.string());
  CHECK(back.config_id == "demo");
  CHECK(back.target.method == train::TargetConfig::Method::kDynamicKd);
  CHECK(back.target.gamma == cfg.target.gamma);
  CHECK(back.target.teacher_checkpoints == cfg.target.teacher_checkpoints);
  CHECK(back.input_rule.kind == proxy::MaskRule::Kind::kGlat);
  CHECK(back.input_rule.anneal_steps == 123);
  CHECK(back.optim.steps == 30);
  CHECK(back.optim.seed == 3);
  fs::remove(path.string());
}

TEST_CASE("malformed configs are rejected as configuration errors") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "natlab_test_bad_cfg.txt";
  {
    std::ofstream out(path);
    out << "steps 10\nwarmup 100\n";
  }
  CHECK_THROWS_AS(train::load_train_config(path.string()), std::invalid_argument);
  {
    std::ofstream out(path);
    out << "no_such_key 1\n";
  }
  CHECK_THROWS_AS(train::load_train_config(path.string()), std::invalid_argument);
  CHECK_THROWS_AS(train::load_train_config("/nonexistent/cfg"), std::invalid_argument);
  fs::remove(path.string());
}

TEST_CASE("teacher training reduces held-out NLL and is seed-deterministic") {
  data::ParallelCorpus corpus = tiny_corpus();
  train::OptimConfig optim = fast_optim();
  optim.steps = 60;
  train::AtTrainResult a = train::train_at(tiny_cfg(), optim, corpus, corpus);
  train::AtTrainResult b = train::train_at(tiny_cfg(), optim, corpus, corpus);
  CHECK(a.params.same_values(b.params));
  REQUIRE(a.dev_nll.size() >= 2);
  CHECK(a.dev_nll.back() < a.dev_nll.front());
}

TEST_CASE("nat training runs, records metrics, and is seed-deterministic") {
  data::ParallelCorpus corpus = tiny_corpus();
  train::NatTrainConfig cfg;
  cfg.config_id = "t";
  cfg.model = tiny_cfg();
  cfg.optim = fast_optim();
  train::NatTrainResult a = train::train_nat(cfg, corpus, corpus);
  train::NatTrainResult b = train::train_nat(cfg, corpus, corpus);
  CHECK(a.params.same_values(b.params));
  CHECK(a.skipped == 0);
  REQUIRE(!a.records.empty());
  for (const metrics::MetricsRecord& r : a.records) {
    CHECK(std::isfinite(r.l_nat));
    CHECK(r.l_nat > 0.0);
    CHECK(r.bleu >= 0.0);
    CHECK(r.bleu <= 100.0);
    CHECK(r.config_id == "t");
  }
  // a longer run should drive the full-mask NLL down on this separable task
  cfg.optim.steps = 120;
  cfg.optim.eval_every = 30;
  train::NatTrainResult longer = train::train_nat(cfg, corpus, corpus);
  CHECK(longer.records.back().l_nat < longer.records.front().l_nat);
}

TEST_CASE("nat training with alignment targets and glat masking stays stable") {
  data::ParallelCorpus corpus = tiny_corpus();
  train::NatTrainConfig cfg;
  cfg.model = tiny_cfg();
  cfg.optim = fast_optim();
  cfg.target.method = train::TargetConfig::Method::kAxe;
  cfg.input_rule.kind = proxy::MaskRule::Kind::kGlat;
  cfg.input_rule.anneal_steps = 30;
  train::NatTrainResult axe = train::train_nat(cfg, corpus, corpus);
  CHECK(axe.skipped == 0);

  cfg.target.method = train::TargetConfig::Method::kOaxe;
  cfg.target.pretrain_steps = 10;
  cfg.input_rule.kind = proxy::MaskRule::Kind::kCmlmUniform;
  train::NatTrainResult oaxe = train::train_nat(cfg, corpus, corpus);
  CHECK(oaxe.skipped == 0);
  CHECK(std::isfinite(oaxe.records.back().l_nat));
}

TEST_CASE("kd training distills through a saved teacher checkpoint") {
  namespace fs = std::filesystem;
  data::ParallelCorpus corpus = tiny_corpus();
  train::OptimConfig optim = fast_optim();
  optim.steps = 80;
  train::AtTrainResult at = train::train_at(tiny_cfg(), optim, corpus, corpus);
  fs::path dir = fs::temp_directory_path() / "natlab_test_teacher";
  model::save_checkpoint(at.params, dir.string());

  train::NatTrainConfig cfg;
  cfg.model = tiny_cfg();
  cfg.optim = fast_optim();
  cfg.target.method = train::TargetConfig::Method::kKd;
  cfg.target.teacher_checkpoints = {dir.string()};
  train::NatTrainResult res = train::train_nat(cfg, corpus, corpus);
  CHECK(std::isfinite(res.records.back().l_nat));

  // dynamic kd with an explicit gamma over {raw, one teacher}
  cfg.target.method = train::TargetConfig::Method::kDynamicKd;
  cfg.target.gamma = {1.0, 1.0};
  train::NatTrainResult dyn = train::train_nat(cfg, corpus, corpus);
  CHECK(std::isfinite(dyn.records.back().l_nat));
  CHECK(dyn.gamma == cfg.target.gamma);
  fs::remove_all(dir);
}

TEST_CASE("tc estimate of a deterministic mapping is near zero") {
  data::ParallelCorpus corpus = tiny_corpus();
  train::OptimConfig optim = fast_optim();
  optim.steps = 100;
  optim.eval_every = 50;
  double c_hat = train::estimate_tc(tiny_cfg(), optim, corpus, corpus);
  // both models can fit a one-mode mapping, so the gap should be small
  CHECK(std::abs(c_hat) < 1.5);
}
