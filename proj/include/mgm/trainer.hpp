#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgm/adamw.hpp"
#include "mgm/checkpoint.hpp"
#include "mgm/corpus.hpp"
#include "mgm/rng.hpp"
#include "mgm/sampler.hpp"
#include "mgm/schedule.hpp"
#include "mgm/tokens.hpp"
#include "mgm/transformer.hpp"

namespace mgm {

struct TrainConfig {
  int batch_size = 16;
  int epochs = 10;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.96f;
  float weight_decay = 1e-5f;
  float label_smoothing = 0.1f;
  float cond_drop_prob = 0.1f;
  MaskScheduleId schedule = MaskScheduleId::Arccos;
  std::uint64_t seed = 1;
  int checkpoint_every = 1;  // epochs

  void validate() const;  // ConfigError naming the offending field
  nn::AdamWConfig adamw() const;
};

// What one optimizer update actually did; the label/mask vectors are the
// instrumentation hook for the condition-dropout and masking contracts.
struct StepStats {
  float loss = 0.0f;
  std::vector<int> used_labels;    // after condition dropout, one per sample
  std::vector<int> masked_counts;  // one per sample
};

// Per sample, in batch order: draw a training mask, replace masked tokens
// with MASK_ID, drop the label to the null class with prob cond_drop_prob,
// forward with dropout, and take smoothed cross-entropy over the masked
// positions only. One AdamW step on the mean of the per-sample losses.
// Every draw (mask, drop, dropout) comes from `rng` in that fixed order,
// so a step is a pure function of its stream seed.
StepStats training_step(Transformer& model, const std::vector<std::pair<TokenGrid, int>>& batch,
                        nn::AdamW& opt, const TrainConfig& config, Rng& rng);

struct EpochRow {
  int epoch = 0;            // 1-based
  float loss = 0.0f;        // mean step loss across the epoch
  double kl = 0.0;          // mean per-class token KL of the eval decodes
  int coverage_tokens = 0;  // distinct token ids across all eval decodes
};

struct TrainerOptions {
  TrainConfig config;
  SamplerConfig eval_sampler;  // its seed field is unused; eval streams derive from config.seed
  int eval_per_class = 16;
  std::string csv_path;        // empty = no CSV
  std::string checkpoint_dir;  // empty = no checkpoints
  std::string config_text;     // echoed into checkpoints
};

struct TrainResult {
  std::vector<EpochRow> rows;  // the epochs run by this call
  long long total_steps = 0;
};

// Epoch loop: shuffled fixed-size batches (remainder dropped), training
// streams derived statelessly from (seed, epoch, step), one EpochRow per
// epoch with eval decode seeds fixed across epochs so the KL curve is
// comparable. Checkpoints land in checkpoint_dir every checkpoint_every
// epochs and at the end. start_epoch > 0 resumes after that many completed
// epochs; at equal total steps the result is bitwise identical to the
// uninterrupted run.
TrainResult train_transformer(Transformer& model, nn::AdamW& opt,
                              const std::vector<std::pair<TokenGrid, int>>& dataset,
                              const std::vector<ReferenceDistribution>& class_refs,
                              const TrainerOptions& options, int start_epoch = 0);

// Model parameters, optimizer moments, and progress counters in one file.
Checkpoint make_train_checkpoint(Transformer& model, nn::AdamW& opt, int epochs_done,
                                 const std::string& config_text);
void restore_train_checkpoint(const Checkpoint& ck, Transformer& model, nn::AdamW& opt);

}  // namespace mgm
