#pragma once

#include <map>
#include <string>
#include <vector>

#include "natlab/data/corpus.hpp"
#include "natlab/metrics/records.hpp"
#include "natlab/model/at_model.hpp"
#include "natlab/model/nat_model.hpp"
#include "natlab/proxy/input.hpp"

namespace natlab::train {

// Training diverged or too many pairs failed; maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct OptimConfig {
  double peak_lr = 3e-3;
  int warmup = 500;
  int steps = 2000;
  int batch_size = 8;
  double label_smoothing = 0.1;
  int eval_every = 200;
  int avg_k = 3;  // checkpoints averaged into the final model
  uint64_t seed = 1;
};

// Warmup to peak_lr, then inverse square-root decay.
double lr_at(const OptimConfig& cfg, int step);

// Adaptive moment estimation over a ParamStore (decay 0.9/0.98, eps 1e-8).
class Adam {
 public:
  explicit Adam(model::ParamStore& ps);
  void step(double lr);

 private:
  model::ParamStore& ps_;
  std::vector<compute::Tensor> m_, v_;
  int t_ = 0;
};

struct TargetConfig {
  enum class Method { kRaw, kKd, kAxe, kOaxe, kDynamicKd };
  Method method = Method::kRaw;
  double skip_penalty = 1.0;                     // axe delta
  int pretrain_steps = 0;                        // oaxe: plain MLE steps first
  double beta = 0.2;                             // dynamic kd regularizer
  std::vector<double> gamma;                     // empty -> tuned on dev refs
  std::vector<std::string> teacher_checkpoints;  // kd: one; dynamic kd: tiers
};

struct NatTrainConfig {
  std::string config_id = "nat";
  model::ModelConfig model;
  TargetConfig target;
  proxy::MaskRule input_rule;
  OptimConfig optim;
};

struct AtTrainResult {
  model::ParamStore params;
  std::vector<double> dev_nll;  // bits/token at each eval point
};

AtTrainResult train_at(const model::ModelConfig& cfg, const OptimConfig& optim,
                       const data::ParallelCorpus& train_set,
                       const data::ParallelCorpus& dev_set);

struct NatTrainResult {
  model::ParamStore params;  // mean of the best avg_k checkpoints by dev BLEU
  std::vector<metrics::MetricsRecord> records;
  std::vector<double> gamma;  // as used (tuned if the config left it empty)
  int skipped = 0;
};

NatTrainResult train_nat(const NatTrainConfig& cfg,
                         const data::ParallelCorpus& train_set,
                         const data::ParallelCorpus& dev_set);

// V-entropy estimate of the conditional total correlation: held-out
// per-token NLL of a vanilla NAT minus that of an AT, both with the same
// trunk configuration, in bits. No EOS/length terms on either side.
double estimate_tc(const model::ModelConfig& family, const OptimConfig& optim,
                   const data::ParallelCorpus& train_set,
                   const data::ParallelCorpus& heldout);

struct EvalOptions {
  double beta = 0.2;      // paraphraser sharpness for the target term
  int mask_samples = 4;   // Monte-Carlo draws per pair for L_NAT / L_input
  uint64_t seed = 1;
};

// Full dev-set metrics row for a trained model under its training config:
// proxy targets are rebuilt against the model, proxy inputs sampled from the
// configured rule, and the three objective terms plus BLEU are reported.
// l_target_hat needs dev references; pairs without them contribute zero.
metrics::MetricsRecord evaluate_config(const NatTrainConfig& cfg,
                                       const model::NatModel& nat,
                                       const data::ParallelCorpus& dev_set,
                                       const EvalOptions& opts);

// Mean 0..100 sentence BLEU of greedy default decoding against dev targets.
double dev_bleu(const model::NatModel& nat, const data::ParallelCorpus& dev_set,
                uint64_t seed, bool input_sampling = false);

// Held-out per-token NLL (bits) of the teacher-forced AT, no EOS term.
double at_dev_nll(const model::AtModel& at, const data::ParallelCorpus& dev_set);
// Held-out per-token NLL (bits) of the NAT with Z = full-mask, no length term.
double nat_dev_nll(const model::NatModel& nat, const data::ParallelCorpus& dev_set);

// Flat key-value config file ("key value" per line, '#' comments).
NatTrainConfig load_train_config(const std::string& path);
void save_train_config(const NatTrainConfig& cfg, const std::string& path);

}  // namespace natlab::train
