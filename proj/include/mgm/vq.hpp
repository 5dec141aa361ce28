#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mgm/adamw.hpp"
#include "mgm/image.hpp"
#include "mgm/ops.hpp"
#include "mgm/tensor.hpp"
#include "mgm/tokens.hpp"

namespace mgm {

struct VqConfig {
  int image_size = 32;
  int channels = 1;
  int codebook_size = 64;
  int code_dim = 8;
  int conv_width = 32;
  float commitment_beta = 0.25f;
};

struct QuantizeResult {
  std::vector<int> indices;
  // Forward value: the selected code vectors. Backward: gradient passes
  // to the latents unchanged (straight-through), never to the codebook.
  nn::Tensor straight_through;
  nn::Tensor codebook_loss;    // pulls codes toward frozen latents
  nn::Tensor commitment_loss;  // pulls latents toward frozen codes
};

// Nearest code by Euclidean distance, ties to the lowest index. Distances
// are accumulated in double so the winner is platform-independent.
QuantizeResult quantize(const nn::Tensor& latents, const nn::Tensor& codebook);

struct CodebookUsage {
  std::vector<std::int64_t> counts;  // one per code
  double perplexity = 0.0;           // exp(entropy); 1 = collapsed, K = uniform
};

CodebookUsage codebook_usage(const std::vector<TokenGrid>& grids, int codebook_size);

struct VqLosses {
  double reconstruction = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
  double total() const { return reconstruction + codebook + commitment; }
};

// Convolutional autoencoder with a quantized bottleneck. Two stride-2
// convs down, mirrored nearest-neighbor upsampling back, so the token
// grid is image_size/4 on each side.
class VqModel {
 public:
  VqModel(const VqConfig& cfg, Rng& rng);

  const VqConfig& config() const { return cfg_; }
  int grid_size() const { return cfg_.image_size / kDownsample; }
  static constexpr int kDownsample = 4;

  // Encoder forward up to the pre-quantization latents, one row per grid
  // position. Image dims must be divisible by the downsample factor.
  nn::Tensor encode_latents(const Image& img) const;

  TokenGrid encode(const Image& img) const;

  // Decoder forward from one latent row per grid position; rows are in
  // raster order of a grid_h x grid_w grid. Output is unclamped.
  nn::Tensor decode_latents(const nn::Tensor& latents, int grid_h, int grid_w) const;

  // Rejects grids containing the mask id; pixels clamped to [0,1].
  Image decode(const TokenGrid& grid) const;

  // One optimizer step on recon MSE + codebook + beta * commitment. Seeds
  // the codebook from this batch's latents on the first call.
  VqLosses train_step(const std::vector<Image>& batch, nn::AdamW& opt, Rng& rng);

  // Fills the codebook with distinct draws from the batch's encoder
  // outputs so no code starts dead.
  void seed_codebook(const std::vector<Image>& batch, Rng& rng);
  bool codebook_seeded() const { return codebook_seeded_; }

  std::vector<nn::Tensor> parameters();
  std::vector<std::pair<std::string, nn::Tensor>> named_parameters();

  nn::Tensor codebook() const { return codebook_; }

 private:
  struct IndexMaps {
    std::vector<std::int64_t> enc1, enc2;      // strided im2col
    std::vector<std::int64_t> up1, dec1;       // first upsample + conv
    std::vector<std::int64_t> up2, dec2;       // second upsample + conv
  };
  const IndexMaps& maps_for(int h, int w) const;

  VqConfig cfg_;
  nn::Tensor e_w1_, e_b1_, e_w2_, e_b2_, e_w3_, e_b3_;
  nn::Tensor d_w1_, d_b1_, d_w2_, d_b2_, d_w3_, d_b3_;
  nn::Tensor codebook_;
  bool codebook_seeded_ = false;
  mutable std::map<std::pair<int, int>, IndexMaps> map_cache_;
};

}  // namespace mgm
