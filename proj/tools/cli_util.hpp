#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mgm/checkpoint.hpp"
#include "mgm/config.hpp"
#include "mgm/corpus.hpp"
#include "mgm/image.hpp"
#include "mgm/sampler.hpp"
#include "mgm/tokens.hpp"
#include "mgm/trainer.hpp"
#include "mgm/transformer.hpp"
#include "mgm/vq.hpp"

namespace mgm::cli {

// Exit codes: 0 success, 2 bad usage/config/input, 1 unexpected failure.
// Every typed error in this codebase signals a precondition the operator
// can fix, so they all map to 2.
int run_guarded(const std::function<int()>& body);

// Load + apply `section.key=value` overrides + validate.
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides);

MarkovCorpusConfig markov_config(const RunConfig& cfg, int grid_h, int grid_w);
TransformerConfig transformer_config(const RunConfig& cfg);
VqConfig vq_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
SamplerConfig sampler_config(const RunConfig& cfg);

// out_dir/run_name with checkpoints/, samples/, traces/ created and
// config.resolved echoed.
std::filesystem::path prepare_run_dir(const RunConfig& cfg);

// Artifact root for commands addressed by checkpoint: the override if
// given, else the run directory the checkpoint lives in.
std::filesystem::path run_root_for(const std::string& checkpoint_path,
                                   const std::string& out_override);

// Synthetic mode (empty dataset_dir): Markov grids rendered one cell per
// VQ downsample stride. Dataset mode: PGM/PPM files under per-class
// subdirectories named 0..classes-1.
std::vector<std::pair<Image, int>> image_corpus(const RunConfig& cfg, std::uint64_t seed);
std::vector<std::pair<TokenGrid, int>> token_corpus(const RunConfig& cfg, std::uint64_t seed);

Checkpoint load_checkpoint_kind(const std::string& path, const std::string& kind);
RunConfig embedded_config(const Checkpoint& ck, const std::string& path);

Transformer restore_transformer(const Checkpoint& ck, const std::string& path);
VqModel restore_vq(const Checkpoint& ck, const std::string& path);

// Token grid to image: VQ decoder when a tokenizer is supplied, cell
// rendering otherwise. image_grid is the inverse pairing.
Image grid_image(const TokenGrid& grid, int codebook_size, const VqModel* vq);
TokenGrid image_grid(const Image& img, int codebook_size, const VqModel* vq);

// Per-token freeze flags from a pixel mask (white = frozen): a token
// position freezes when the majority of its block's pixels are white.
std::vector<std::uint8_t> freeze_from_mask(const Image& mask, int grid_h, int grid_w);

// One JSON object per decode step:
// {step, remaining_masked, newly_fixed, gumbel_temp_t, forwards_so_far}.
void write_trace(const std::filesystem::path& path, const DecodeTrace& trace);

// Decode-progress snapshot pair: the binary mask (white = still masked)
// and the committed tokens with still-masked cells black.
std::pair<Image, Image> snapshot_images(const DecodeStep& step, int grid_h, int grid_w,
                                        int codebook_size, int cell = 4);

// Stream tags for derive_seed; spaced away from the trainer's internal tags.
inline constexpr std::uint64_t kSeedData = 0x90;
inline constexpr std::uint64_t kSeedVqInit = 0x91;
inline constexpr std::uint64_t kSeedVqShuffle = 0x92;
inline constexpr std::uint64_t kSeedVqStep = 0x93;
inline constexpr std::uint64_t kSeedModelInit = 0x94;
inline constexpr std::uint64_t kSeedSample = 0x95;
inline constexpr std::uint64_t kSeedAblate = 0x96;
inline constexpr std::uint64_t kSeedBench = 0x97;

}  // namespace mgm::cli
