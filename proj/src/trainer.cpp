#include "mgm/trainer.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>

#include "mgm/csvio.hpp"
#include "mgm/error.hpp"
#include "mgm/metrics.hpp"
#include "mgm/ops.hpp"

namespace mgm {

namespace {

// Stream purposes for derive_seed; distinct constants keep the shuffle,
// step, and eval streams from ever aliasing.
constexpr std::uint64_t kTagShuffle = 0xA1;
constexpr std::uint64_t kTagStep = 0xA2;
constexpr std::uint64_t kTagEval = 0xA3;

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train epochs must be >= 1");
  if (lr < 0.0f) throw ConfigError("train lr must be >= 0");
  if (beta1 < 0.0f || beta1 >= 1.0f) throw ConfigError("train beta1 must be in [0,1)");
  if (beta2 < 0.0f || beta2 >= 1.0f) throw ConfigError("train beta2 must be in [0,1)");
  if (weight_decay < 0.0f) throw ConfigError("train weight_decay must be >= 0");
  if (label_smoothing < 0.0f || label_smoothing >= 1.0f) {
    throw ConfigError("train label_smoothing must be in [0,1)");
  }
  if (cond_drop_prob < 0.0f || cond_drop_prob > 1.0f) {
    throw ConfigError("train cond_drop_prob must be in [0,1]");
  }
  if (checkpoint_every < 1) throw ConfigError("train checkpoint_every must be >= 1");
}

nn::AdamWConfig TrainConfig::adamw() const {
  nn::AdamWConfig cfg;
  cfg.lr = lr;
  cfg.beta1 = beta1;
  cfg.beta2 = beta2;
  cfg.weight_decay = weight_decay;
  return cfg;
}

StepStats training_step(Transformer& model, const std::vector<std::pair<TokenGrid, int>>& batch,
                        nn::AdamW& opt, const TrainConfig& config, Rng& rng) {
  if (batch.empty()) throw ContractError("training_step: empty batch");
  config.validate();
  const TransformerConfig& mc = model.config();
  const int kMask = mask_id(mc.codebook_size);

  StepStats stats;
  nn::Tensor total;
  for (const auto& [grid, label] : batch) {
    if (label < 0 || label >= mc.num_classes) {
      throw IndexError("training_step: class label out of range");
    }
    for (int t : grid.tokens) {
      if (t < 0 || t >= mc.codebook_size) {
        throw ContractError("training_step: input grids must hold visual tokens only");
      }
    }

    const TrainingMask tm =
        sample_training_mask(static_cast<int>(grid.tokens.size()), config.schedule, rng);
    TokenGrid masked = grid;
    std::vector<int> positions;
    std::vector<int> targets;
    for (std::size_t i = 0; i < tm.mask.size(); ++i) {
      if (!tm.mask[i]) continue;
      masked.tokens[i] = kMask;
      positions.push_back(static_cast<int>(i));
      targets.push_back(grid.tokens[i]);
    }

    const int used = rng.uniform() < config.cond_drop_prob ? kNullClass : label;
    stats.used_labels.push_back(used);
    stats.masked_counts.push_back(tm.masked_count);

    const nn::Tensor logits = model.forward(masked, used, /*dropout_active=*/true, &rng);
    const nn::Tensor masked_logits = nn::gather_rows(logits, positions);
    const nn::Tensor ce =
        nn::cross_entropy_label_smoothed(masked_logits, targets, config.label_smoothing);
    total = total.defined() ? nn::add(total, ce) : ce;
  }

  const nn::Tensor loss = nn::scale(total, 1.0f / static_cast<float>(batch.size()));
  opt.zero_grad();
  nn::backward(loss);
  opt.step();
  stats.loss = loss.data()[0];
  return stats;
}

namespace {

struct EvalOutcome {
  double kl = 0.0;
  int coverage_tokens = 0;
};

EvalOutcome run_eval(const Transformer& model, const std::vector<ReferenceDistribution>& refs,
                     const TrainerOptions& options) {
  EvalOutcome out;
  std::set<int> seen;
  for (std::size_t c = 0; c < refs.size(); ++c) {
    std::vector<TokenGrid> grids;
    for (int i = 0; i < options.eval_per_class; ++i) {
      SamplerConfig sc = options.eval_sampler;
      sc.seed = derive_seed(options.config.seed,
                            {kTagEval, static_cast<std::uint64_t>(c),
                             static_cast<std::uint64_t>(i)});
      grids.push_back(decode(model, static_cast<int>(c), sc).final_grid);
      for (int t : grids.back().tokens) seen.insert(t);
    }
    out.kl += token_histogram_kl(grids, refs[c]);
  }
  out.kl /= static_cast<double>(refs.size());
  out.coverage_tokens = static_cast<int>(seen.size());
  return out;
}

}  // namespace

TrainResult train_transformer(Transformer& model, nn::AdamW& opt,
                              const std::vector<std::pair<TokenGrid, int>>& dataset,
                              const std::vector<ReferenceDistribution>& class_refs,
                              const TrainerOptions& options, int start_epoch) {
  const TrainConfig& config = options.config;
  config.validate();
  options.eval_sampler.validate();
  if (dataset.empty()) throw ContractError("train_transformer: empty dataset");
  if (class_refs.empty()) throw ContractError("train_transformer: no reference distributions");
  if (options.eval_per_class < 1) throw ConfigError("eval_per_class must be >= 1");
  if (start_epoch < 0 || start_epoch > config.epochs) {
    throw ConfigError("start_epoch must be in [0, epochs]");
  }

  const int n = static_cast<int>(dataset.size());
  const int batch = std::min(config.batch_size, n);
  const int steps_per_epoch = n / batch;

  std::optional<CsvWriter> csv;
  if (!options.csv_path.empty()) {
    csv.emplace(options.csv_path,
                std::vector<std::string>{"epoch", "loss", "kl", "coverage_tokens"});
  }

  TrainResult result;
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, {kTagShuffle, static_cast<std::uint64_t>(epoch)}));
    const std::vector<int> perm = shuffle_rng.permutation(n);

    double loss_sum = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<std::pair<TokenGrid, int>> slice;
      slice.reserve(batch);
      for (int b = 0; b < batch; ++b) {
        slice.push_back(dataset[perm[static_cast<std::size_t>(step) * batch + b]]);
      }
      Rng rng(derive_seed(config.seed, {kTagStep, static_cast<std::uint64_t>(epoch),
                                        static_cast<std::uint64_t>(step)}));
      loss_sum += training_step(model, slice, opt, config, rng).loss;
      ++result.total_steps;
    }

    const EvalOutcome eval = run_eval(model, class_refs, options);
    EpochRow row;
    row.epoch = epoch + 1;
    row.loss = static_cast<float>(loss_sum / steps_per_epoch);
    row.kl = eval.kl;
    row.coverage_tokens = eval.coverage_tokens;
    result.rows.push_back(row);
    if (csv) {
      csv->row({std::to_string(row.epoch), format_float(row.loss), format_float(row.kl),
                std::to_string(row.coverage_tokens)});
      csv->flush();
    }

    if (!options.checkpoint_dir.empty() &&
        ((epoch + 1) % config.checkpoint_every == 0 || epoch + 1 == config.epochs)) {
      const Checkpoint ck = make_train_checkpoint(model, opt, epoch + 1, options.config_text);
      save_checkpoint(options.checkpoint_dir + "/epoch_" + std::to_string(epoch + 1) + ".ckpt",
                      ck);
      save_checkpoint(options.checkpoint_dir + "/latest.ckpt", ck);
    }
  }
  return result;
}

Checkpoint make_train_checkpoint(Transformer& model, nn::AdamW& opt, int epochs_done,
                                 const std::string& config_text) {
  Checkpoint ck;
  ck.config_text = config_text;
  ck.metadata["kind"] = "transformer";
  ck.metadata["epochs_done"] = std::to_string(epochs_done);
  ck.metadata["opt_steps"] = std::to_string(opt.step_count());
  const auto named = model.named_parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    ck.tensors.emplace_back(named[i].first, named[i].second);
    ck.tensors.emplace_back("opt." + named[i].first + ".m1",
                            nn::Tensor::from_data(named[i].second.shape(), opt.first_moment(i)));
    ck.tensors.emplace_back("opt." + named[i].first + ".m2",
                            nn::Tensor::from_data(named[i].second.shape(), opt.second_moment(i)));
  }
  return ck;
}

void restore_train_checkpoint(const Checkpoint& ck, Transformer& model, nn::AdamW& opt) {
  const auto kind = ck.metadata.find("kind");
  if (kind != ck.metadata.end() && kind->second != "transformer") {
    throw FormatError("checkpoint kind is '" + kind->second + "', expected 'transformer'");
  }
  restore_tensors(ck, model.named_parameters());
  const auto named = model.named_parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    for (const char* kind : {".m1", ".m2"}) {
      const nn::Tensor* src = ck.find("opt." + named[i].first + kind);
      if (src == nullptr) {
        throw FormatError("checkpoint is missing optimizer moment for '" + named[i].first + "'");
      }
      std::vector<float>& dst =
          kind[2] == '1' ? opt.first_moment(i) : opt.second_moment(i);
      if (src->data().size() != dst.size()) {
        throw DimensionError("optimizer moment size mismatch for '" + named[i].first + "'");
      }
      dst = src->data();
    }
  }
  opt.set_step_count(ck.meta_int("opt_steps", 0));
}

}  // namespace mgm
