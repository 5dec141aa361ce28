#pragma once

#include <cstdint>
#include <string>

#include "mgm/schedule.hpp"

namespace mgm {

// Every tunable in one flat struct; file format is INI-style `key = value`
// under [section] headers. Unknown sections or keys are rejected, every
// field has a default, and serialization uses one canonical order.
struct RunConfig {
  // [run]
  std::string run_name = "run";
  std::string out_dir = "runs";
  std::uint64_t seed = 1;

  // [data] — synthetic corpus when dataset_dir is empty
  std::string dataset_dir;
  int classes = 2;
  int image_size = 32;
  int image_channels = 1;
  int corpus_per_class = 256;
  double markov_sigma = 1.5;

  // [tokenizer]
  int codebook_size = 64;
  int code_dim = 8;
  int conv_width = 32;
  double commitment_beta = 0.25;

  // [transformer]
  int hidden_dim = 128;
  int depth = 4;
  int heads = 4;
  int mlp_dim = 512;
  double dropout = 0.1;
  int grid_h = 8;
  int grid_w = 8;

  // [train]
  int batch_size = 16;
  int epochs = 10;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.96;
  double weight_decay = 1e-5;
  double label_smoothing = 0.1;
  double cond_drop_prob = 0.1;
  MaskScheduleId train_schedule = MaskScheduleId::Arccos;
  int checkpoint_every = 1;

  // [sampler]
  int steps = 8;
  MaskScheduleId sample_schedule = MaskScheduleId::Arccos;
  double softmax_temp = 1.0;
  double gumbel_temp = 4.5;
  double cfg_weight = 3.0;
  int snapshot_every = 0;  // 0 = no snapshots

  // Cross-field invariants; ConfigError naming the offending key.
  void validate() const;
};

// Parse `key = value` text. Missing keys keep defaults; unknown keys are a
// ConfigError naming the key. `source` labels error messages (path or tag).
RunConfig parse_config_text(const std::string& text, const std::string& source);
RunConfig load_config(const std::string& path);

// Canonical serialization: fixed section and key order, one key per line.
std::string serialize_config(const RunConfig& cfg);

// Apply one `section.key=value` override (CLI convenience).
void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

}  // namespace mgm
