#include "mgm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "mgm/error.hpp"

namespace mgm {

void SamplerConfig::validate() const {
  if (steps < 1) throw ConfigError("sampler steps must be >= 1");
  if (!(softmax_temp > 0.0f)) throw ConfigError("sampler softmax_temp must be > 0");
  if (gumbel_temp < 0.0f) throw ConfigError("sampler gumbel_temp must be >= 0");
  if (cfg_weight < 0.0f) throw ConfigError("sampler cfg_weight must be >= 0");
}

std::vector<int> plan_unmask_counts(MaskScheduleId schedule, int steps, int n) {
  if (steps < 1) throw InvalidParameterError("plan_unmask_counts: steps must be >= 1");
  if (n < 1) throw InvalidParameterError("plan_unmask_counts: n must be >= 1");
  if (steps > n) {
    throw ConfigError("steps " + std::to_string(steps) + " exceeds positions " +
                      std::to_string(n) + ": cannot commit one token per step");
  }

  std::vector<int> counts(steps);
  int prev_remaining = n;
  for (int t = 1; t <= steps; ++t) {
    int remaining = 0;
    if (t < steps) {
      const double g = schedule_gamma(schedule, static_cast<double>(t) / steps);
      remaining = static_cast<int>(std::llround(g * n));
      remaining = std::min(remaining, prev_remaining);
    }
    counts[t - 1] = prev_remaining - remaining;
    prev_remaining = remaining;
  }

  // Zero-count steps borrow a commit from the nearest donor, later first.
  for (int t = 0; t < steps; ++t) {
    if (counts[t] > 0) continue;
    int donor = -1;
    for (int d = t + 1; d < steps; ++d) {
      if (counts[d] > 1) {
        donor = d;
        break;
      }
    }
    if (donor < 0) {
      for (int d = t - 1; d >= 0; --d) {
        if (counts[d] > 1) {
          donor = d;
          break;
        }
      }
    }
    --counts[donor];  // n >= steps guarantees a donor exists
    ++counts[t];
  }
  return counts;
}

std::vector<float> cfg_logits(const std::vector<float>& cond, const std::vector<float>& uncond,
                              float w) {
  if (cond.size() != uncond.size()) {
    throw DimensionError("cfg_logits: cond and uncond sizes differ");
  }
  if (w < 0.0f) throw InvalidParameterError("cfg_logits: w must be >= 0");
  if (w == 0.0f) return cond;
  std::vector<float> out(cond.size());
  for (std::size_t i = 0; i < cond.size(); ++i) {
    out[i] = cond[i] + w * (cond[i] - uncond[i]);
  }
  return out;
}

SampledTokens sample_tokens(const std::vector<float>& logits, int rows, int cols,
                            float softmax_temp, Rng& rng) {
  if (rows < 1 || cols < 1 ||
      logits.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw DimensionError("sample_tokens: logits size does not match rows×cols");
  }
  if (!(softmax_temp > 0.0f)) {
    throw InvalidParameterError("sample_tokens: softmax_temp must be > 0");
  }

  SampledTokens out;
  out.tokens.resize(rows);
  out.confidence.resize(rows);
  std::vector<double> p(cols);
  for (int r = 0; r < rows; ++r) {
    const float* row = logits.data() + static_cast<std::size_t>(r) * cols;
    double max_l = -1e300;
    for (int j = 0; j < cols; ++j) {
      max_l = std::max(max_l, static_cast<double>(row[j]) / softmax_temp);
    }
    double total = 0.0;
    for (int j = 0; j < cols; ++j) {
      p[j] = std::exp(static_cast<double>(row[j]) / softmax_temp - max_l);
      total += p[j];
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    int pick = cols - 1;  // rounding slack past the last partial sum
    for (int j = 0; j < cols; ++j) {
      cum += p[j];
      if (u < cum) {
        pick = j;
        break;
      }
    }
    out.tokens[r] = pick;
    out.confidence[r] = static_cast<float>(p[pick] / total);
  }
  return out;
}

std::vector<int> confidence_select(const std::vector<float>& confidence,
                                   const std::vector<std::uint8_t>& frozen,
                                   const std::vector<std::uint8_t>& still_masked, int keep_count,
                                   float gumbel_temp_t, Rng& rng) {
  const std::size_t n = confidence.size();
  if (frozen.size() != n || still_masked.size() != n) {
    throw DimensionError("confidence_select: grid sizes differ");
  }
  if (gumbel_temp_t < 0.0f) {
    throw InvalidParameterError("confidence_select: gumbel_temp_t must be >= 0");
  }
  if (keep_count < 0) throw ContractError("confidence_select: keep_count must be >= 0");

  std::vector<int> candidates;
  std::vector<double> score;
  for (std::size_t i = 0; i < n; ++i) {
    if (!still_masked[i] || frozen[i]) continue;
    candidates.push_back(static_cast<int>(i));
    const double base = std::log(std::max(confidence[i], 1e-45f));
    score.push_back(base + static_cast<double>(gumbel_temp_t) * rng.gumbel());
  }
  if (keep_count > static_cast<int>(candidates.size())) {
    throw ContractError("confidence_select: keep_count " + std::to_string(keep_count) +
                        " exceeds " + std::to_string(candidates.size()) +
                        " selectable positions");
  }

  // Stable sort on descending score: equal scores keep ascending index.
  std::vector<int> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return score[a] > score[b]; });

  std::vector<int> picked(static_cast<std::size_t>(keep_count));
  for (int i = 0; i < keep_count; ++i) picked[i] = candidates[order[i]];
  std::sort(picked.begin(), picked.end());
  return picked;
}

DecodeTrace inpaint(const Transformer& model, const TokenGrid& grid,
                    const std::vector<std::uint8_t>& freeze_mask, int class_label,
                    const SamplerConfig& config) {
  config.validate();
  const TransformerConfig& mc = model.config();
  if (grid.height != mc.grid_h || grid.width != mc.grid_w) {
    throw DimensionError("inpaint: grid dims do not match the model");
  }
  const int n_total = static_cast<int>(grid.tokens.size());
  if (static_cast<int>(freeze_mask.size()) != n_total) {
    throw DimensionError("inpaint: freeze mask size does not match the grid");
  }
  const int kMask = mask_id(mc.codebook_size);
  int n_free = 0;
  for (int i = 0; i < n_total; ++i) {
    if (freeze_mask[i]) {
      if (grid.tokens[i] == kMask) {
        throw ContractError("inpaint: frozen position " + std::to_string(i) + " holds MASK");
      }
    } else {
      ++n_free;
    }
  }

  DecodeTrace trace;
  if (n_free == 0) {
    trace.final_grid = grid;
    return trace;
  }
  const std::vector<int> counts = plan_unmask_counts(config.schedule, config.steps, n_free);

  TokenGrid work = grid;
  std::vector<std::uint8_t> still_masked(n_total);
  for (int i = 0; i < n_total; ++i) {
    still_masked[i] = freeze_mask[i] ? 0 : 1;
    if (!freeze_mask[i]) work.tokens[i] = kMask;
  }

  Rng rng(config.seed);
  const int kCodebook = mc.codebook_size;
  for (int t = 1; t <= config.steps; ++t) {
    std::vector<float> logits = model.forward(work, class_label).data();
    ++trace.forward_passes;
    if (config.cfg_weight > 0.0f) {
      const nn::Tensor uncond = model.forward(work, kNullClass);
      ++trace.forward_passes;
      logits = cfg_logits(logits, uncond.data(), config.cfg_weight);
    }

    std::vector<int> masked_pos;
    for (int i = 0; i < n_total; ++i) {
      if (still_masked[i]) masked_pos.push_back(i);
    }
    std::vector<float> sub(masked_pos.size() * static_cast<std::size_t>(kCodebook));
    for (std::size_t j = 0; j < masked_pos.size(); ++j) {
      const float* row = logits.data() + static_cast<std::size_t>(masked_pos[j]) * kCodebook;
      std::copy(row, row + kCodebook, sub.begin() + j * kCodebook);
    }
    const SampledTokens drawn = sample_tokens(sub, static_cast<int>(masked_pos.size()),
                                              kCodebook, config.softmax_temp, rng);

    std::vector<float> conf(n_total, 0.0f);
    std::vector<int> sampled(n_total, -1);
    for (std::size_t j = 0; j < masked_pos.size(); ++j) {
      conf[masked_pos[j]] = drawn.confidence[j];
      sampled[masked_pos[j]] = drawn.tokens[j];
    }

    const float gumbel_temp_t =
        config.gumbel_temp * (1.0f - static_cast<float>(t) / static_cast<float>(config.steps));
    const std::vector<int> commit =
        confidence_select(conf, freeze_mask, still_masked, counts[t - 1], gumbel_temp_t, rng);
    for (int pos : commit) {
      work.tokens[pos] = sampled[pos];  // re-masked positions keep MASK: draws discarded
      still_masked[pos] = 0;
    }

    DecodeStep step;
    step.step = t;
    step.masked = still_masked;
    step.tokens = work;
    step.confidence = std::move(conf);
    step.newly_fixed = counts[t - 1];
    step.gumbel_temp_t = gumbel_temp_t;
    step.forwards_so_far = trace.forward_passes;
    trace.steps.push_back(std::move(step));

    if (config.snapshot_every > 0 &&
        (t % config.snapshot_every == 0 || t == config.steps)) {
      trace.snapshot_steps.push_back(t);
    }
  }
  trace.final_grid = std::move(work);
  return trace;
}

DecodeTrace decode(const Transformer& model, int class_label, const SamplerConfig& config) {
  const TransformerConfig& mc = model.config();
  const TokenGrid all_mask(mc.grid_h, mc.grid_w, mask_id(mc.codebook_size));
  const std::vector<std::uint8_t> no_freeze(all_mask.tokens.size(), 0);
  return inpaint(model, all_mask, no_freeze, class_label, config);
}

BaselineResult autoregressive_baseline(const Transformer& model, int class_label,
                                       float softmax_temp, std::uint64_t seed) {
  const TransformerConfig& mc = model.config();
  const int kCodebook = mc.codebook_size;
  BaselineResult out;
  out.grid = TokenGrid(mc.grid_h, mc.grid_w, mask_id(kCodebook));
  Rng rng(seed);
  const int n = mc.grid_size();
  for (int pos = 0; pos < n; ++pos) {
    const nn::Tensor step_logits = model.forward(out.grid, class_label);
    const std::vector<float>& logits = step_logits.data();
    ++out.forward_passes;
    const std::vector<float> row(logits.begin() + static_cast<std::size_t>(pos) * kCodebook,
                                 logits.begin() + static_cast<std::size_t>(pos + 1) * kCodebook);
    out.grid.tokens[pos] = sample_tokens(row, 1, kCodebook, softmax_temp, rng).tokens[0];
  }
  return out;
}

}  // namespace mgm
