#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mgm/image.hpp"
#include "mgm/rng.hpp"
#include "mgm/tokens.hpp"

namespace mgm {

// Exact token law of one corpus class: tokens form a first-order Markov
// chain in raster order, so every factor below is a proper distribution
// and position marginals are computable in closed form.
struct ReferenceDistribution {
  int codebook_size = 0;
  std::vector<double> initial;     // K entries, sums to 1
  std::vector<double> transition;  // K×K row-major, each row sums to 1

  double trans(int from, int to) const {
    return transition[static_cast<std::size_t>(from) * codebook_size + to];
  }
};

struct MarkovCorpusConfig {
  int classes = 2;
  int codebook_size = 16;
  int grid_h = 8;
  int grid_w = 8;
  double sigma = 1.5;  // cyclic Gaussian kernel width, > 0
};

// Class c starts near token c·K/C and drifts c+1 steps per position around
// the token ring; kernels are cyclic Gaussians so every probability is
// strictly positive (KL against this reference is always finite).
ReferenceDistribution class_reference(const MarkovCorpusConfig& cfg, int label);

// Raster-order ancestral sampling from the chain.
TokenGrid sample_grid(const ReferenceDistribution& ref, int grid_h, int grid_w, Rng& rng);

// per_class grids per label, labels in blocks [0..C), streams derived from
// seed so the corpus is reproducible element-by-element.
std::vector<std::pair<TokenGrid, int>> make_token_corpus(const MarkovCorpusConfig& cfg,
                                                         int per_class, std::uint64_t seed);

// Position-averaged marginal (1/n)·Σ μ_i with μ_1 = initial, μ_{i+1} = μ_i·A.
std::vector<double> exact_unigram(const ReferenceDistribution& ref, int n_positions);

// Maximum-likelihood Markov fit of observed grids (pseudo-count smoothing);
// stands in for the exact reference when the corpus comes from images.
ReferenceDistribution empirical_reference(const std::vector<TokenGrid>& grids,
                                          int codebook_size, double pseudo_count = 0.5);

// Token t becomes a cell×cell block of intensity (t+0.5)/K: a tokenizer-free
// renderer for snapshots and for the synthetic image corpus.
Image render_tokens(const TokenGrid& grid, int codebook_size, int cell = 4);

// Inverse of render_tokens: mean gray per cell block, quantized back to a
// token id. Exact round-trip on rendered grids; nearest level otherwise.
TokenGrid tokens_from_render(const Image& img, int codebook_size, int cell = 4);

}  // namespace mgm
