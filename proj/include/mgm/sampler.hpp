#pragma once

#include <cstdint>
#include <vector>

#include "mgm/rng.hpp"
#include "mgm/schedule.hpp"
#include "mgm/tokens.hpp"
#include "mgm/transformer.hpp"

namespace mgm {

struct SamplerConfig {
  int steps = 8;
  MaskScheduleId schedule = MaskScheduleId::Arccos;
  float softmax_temp = 1.0f;
  float gumbel_temp = 4.5f;
  float cfg_weight = 3.0f;
  std::uint64_t seed = 0;
  int snapshot_every = 0;  // 0 = no snapshots

  // ConfigError naming the offending field.
  void validate() const;
};

struct DecodeStep {
  int step = 0;                      // 1-based
  std::vector<std::uint8_t> masked;  // state after this step's commits
  TokenGrid tokens;                  // committed tokens; MASK_ID where still masked
  std::vector<float> confidence;     // sampled-token prob where sampled this step, else 0
  int newly_fixed = 0;
  float gumbel_temp_t = 0.0f;
  long long forwards_so_far = 0;
};

// Committed positions only grow step over step and their tokens never
// change; the masked count falls strictly to zero.
struct DecodeTrace {
  std::vector<DecodeStep> steps;
  TokenGrid final_grid{0, 0};
  long long forward_passes = 0;
  std::vector<int> snapshot_steps;  // 1-based, per snapshot_every, always ends at T
};

// Newly-committed tokens per step: remaining(t) = round(gamma(t/T)·N)
// half-away-from-zero, forced to 0 at t=T; zero-count steps borrow one
// commit from the nearest later (then earlier) step holding more than one.
// Entries sum to N and are all >= 1; T > N is a ConfigError.
std::vector<int> plan_unmask_counts(MaskScheduleId schedule, int steps, int n);

// (1+w)·cond − w·uncond elementwise, computed as cond + w·(cond − uncond)
// so w=0 and cond==uncond are exact fixed points.
std::vector<float> cfg_logits(const std::vector<float>& cond, const std::vector<float>& uncond,
                              float w);

struct SampledTokens {
  std::vector<int> tokens;        // one categorical draw per row
  std::vector<float> confidence;  // probability the draw had under softmax(logits/temp)
};

// Rows drawn independently in index order (one uniform consumed per row);
// softmax in double with max subtraction.
SampledTokens sample_tokens(const std::vector<float>& logits, int rows, int cols,
                            float softmax_temp, Rng& rng);

// Top keep_count candidates by log(confidence) + gumbel_temp_t·G, G a
// standard Gumbel drawn per candidate in index order (consumed even at
// temperature 0, where the term is exactly zero). Candidates are positions
// still masked and not frozen; ties prefer the lower index. Returned
// indices are ascending.
std::vector<int> confidence_select(const std::vector<float>& confidence,
                                   const std::vector<std::uint8_t>& frozen,
                                   const std::vector<std::uint8_t>& still_masked, int keep_count,
                                   float gumbel_temp_t, Rng& rng);

// Iterative parallel decoding from an all-MASK grid: per step, forward
// (conditional plus unconditional when cfg_weight > 0), sample the still-
// masked positions, commit the top plan_unmask_counts(t) by noisy
// confidence with gumbel_temp_t = gumbel_temp·(1 − t/T), re-mask the rest.
DecodeTrace decode(const Transformer& model, int class_label, const SamplerConfig& config);

// decode over the non-frozen positions only; frozen positions keep their
// tokens bitwise in every step. Freezing everything returns the input with
// zero forwards. Frozen MASK_ID is a contract error.
DecodeTrace inpaint(const Transformer& model, const TokenGrid& grid,
                    const std::vector<std::uint8_t>& freeze_mask, int class_label,
                    const SamplerConfig& config);

struct BaselineResult {
  TokenGrid grid{0, 0};
  long long forward_passes = 0;
};

// Raster-order decoding, one forward per position, no guidance.
BaselineResult autoregressive_baseline(const Transformer& model, int class_label,
                                       float softmax_temp, std::uint64_t seed);

}  // namespace mgm
