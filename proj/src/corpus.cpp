#include "mgm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mgm/error.hpp"

namespace mgm {

namespace {

int cyclic_distance(int a, int b, int k) {
  int d = a - b;
  if (d < 0) d = -d;
  return d < k - d ? d : k - d;
}

// Normalized cyclic Gaussian centered at `center` over the token ring.
std::vector<double> ring_kernel(int k, int center, double sigma) {
  std::vector<double> p(k);
  double total = 0.0;
  for (int j = 0; j < k; ++j) {
    const double d = cyclic_distance(j, center, k);
    p[j] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += p[j];
  }
  for (double& v : p) v /= total;
  return p;
}

void validate_corpus_config(const MarkovCorpusConfig& cfg) {
  if (cfg.classes < 1) throw InvalidParameterError("corpus classes must be >= 1");
  if (cfg.codebook_size < 2) throw InvalidParameterError("corpus codebook_size must be >= 2");
  if (cfg.grid_h < 1 || cfg.grid_w < 1) {
    throw InvalidParameterError("corpus grid dims must be >= 1");
  }
  if (!(cfg.sigma > 0.0)) throw InvalidParameterError("corpus sigma must be > 0");
}

int draw_categorical(const double* p, int k, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (int j = 0; j < k; ++j) {
    cum += p[j];
    if (u < cum) return j;
  }
  return k - 1;  // u landed in the rounding slack past the last partial sum
}

}  // namespace

ReferenceDistribution class_reference(const MarkovCorpusConfig& cfg, int label) {
  validate_corpus_config(cfg);
  if (label < 0 || label >= cfg.classes) {
    throw IndexError("corpus class label out of range");
  }
  const int k = cfg.codebook_size;
  ReferenceDistribution ref;
  ref.codebook_size = k;
  const int center = static_cast<int>(
      (static_cast<long long>(label) * k) / cfg.classes);
  ref.initial = ring_kernel(k, center, cfg.sigma);
  const int drift = label + 1;
  ref.transition.resize(static_cast<std::size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    const std::vector<double> row = ring_kernel(k, (i + drift) % k, cfg.sigma);
    for (int j = 0; j < k; ++j) {
      ref.transition[static_cast<std::size_t>(i) * k + j] = row[j];
    }
  }
  return ref;
}

TokenGrid sample_grid(const ReferenceDistribution& ref, int grid_h, int grid_w, Rng& rng) {
  const int k = ref.codebook_size;
  TokenGrid grid(grid_h, grid_w);
  int prev = draw_categorical(ref.initial.data(), k, rng);
  grid.tokens[0] = prev;
  for (std::size_t i = 1; i < grid.tokens.size(); ++i) {
    prev = draw_categorical(&ref.transition[static_cast<std::size_t>(prev) * k], k, rng);
    grid.tokens[i] = prev;
  }
  return grid;
}

std::vector<std::pair<TokenGrid, int>> make_token_corpus(const MarkovCorpusConfig& cfg,
                                                         int per_class, std::uint64_t seed) {
  validate_corpus_config(cfg);
  if (per_class < 1) throw InvalidParameterError("corpus per_class must be >= 1");
  std::vector<std::pair<TokenGrid, int>> corpus;
  corpus.reserve(static_cast<std::size_t>(cfg.classes) * per_class);
  for (int c = 0; c < cfg.classes; ++c) {
    const ReferenceDistribution ref = class_reference(cfg, c);
    for (int i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(seed, {0x1c0u, static_cast<std::uint64_t>(c),
                                 static_cast<std::uint64_t>(i)}));
      corpus.emplace_back(sample_grid(ref, cfg.grid_h, cfg.grid_w, rng), c);
    }
  }
  return corpus;
}

std::vector<double> exact_unigram(const ReferenceDistribution& ref, int n_positions) {
  if (n_positions < 1) throw InvalidParameterError("exact_unigram needs n_positions >= 1");
  const int k = ref.codebook_size;
  std::vector<double> mu = ref.initial;
  std::vector<double> acc = mu;
  std::vector<double> next(k);
  for (int i = 1; i < n_positions; ++i) {
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int a = 0; a < k; ++a) {
        s += mu[a] * ref.trans(a, j);
      }
      next[j] = s;
    }
    mu.swap(next);
    for (int j = 0; j < k; ++j) acc[j] += mu[j];
  }
  for (double& v : acc) v /= n_positions;
  return acc;
}

ReferenceDistribution empirical_reference(const std::vector<TokenGrid>& grids,
                                          int codebook_size, double pseudo_count) {
  if (grids.empty()) throw ContractError("empirical_reference: no grids");
  if (codebook_size < 2) throw InvalidParameterError("codebook_size must be >= 2");
  if (!(pseudo_count > 0.0)) throw InvalidParameterError("pseudo_count must be > 0");
  const int k = codebook_size;
  std::vector<double> first(k, pseudo_count);
  std::vector<double> pairs(static_cast<std::size_t>(k) * k, pseudo_count);
  for (const TokenGrid& g : grids) {
    for (std::size_t i = 0; i < g.tokens.size(); ++i) {
      const int t = g.tokens[i];
      if (t < 0 || t >= k) throw ContractError("empirical_reference: token out of range");
      if (i == 0) first[t] += 1.0;
      if (i > 0) pairs[static_cast<std::size_t>(g.tokens[i - 1]) * k + t] += 1.0;
    }
  }
  ReferenceDistribution ref;
  ref.codebook_size = k;
  ref.initial = std::move(first);
  double total = 0.0;
  for (double v : ref.initial) total += v;
  for (double& v : ref.initial) v /= total;
  ref.transition = std::move(pairs);
  for (int i = 0; i < k; ++i) {
    double row = 0.0;
    for (int j = 0; j < k; ++j) row += ref.trans(i, j);
    for (int j = 0; j < k; ++j) {
      ref.transition[static_cast<std::size_t>(i) * k + j] /= row;
    }
  }
  return ref;
}

Image render_tokens(const TokenGrid& grid, int codebook_size, int cell) {
  if (cell < 1) throw InvalidParameterError("render cell must be >= 1");
  Image img = make_image(grid.height * cell, grid.width * cell, 1);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const int t = grid.at(y, x);
      if (t < 0 || t >= codebook_size) {
        throw ContractError("render_tokens: token out of range");
      }
      const float v = (static_cast<float>(t) + 0.5f) / static_cast<float>(codebook_size);
      for (int dy = 0; dy < cell; ++dy) {
        for (int dx = 0; dx < cell; ++dx) {
          img.at(y * cell + dy, x * cell + dx, 0) = v;
        }
      }
    }
  }
  return img;
}

TokenGrid tokens_from_render(const Image& img, int codebook_size, int cell) {
  if (cell < 1) throw InvalidParameterError("render cell must be >= 1");
  if (codebook_size < 1) throw InvalidParameterError("codebook_size must be >= 1");
  if (img.height % cell != 0 || img.width % cell != 0) {
    throw DimensionError("tokens_from_render: image dims must be multiples of the cell size");
  }
  TokenGrid grid(img.height / cell, img.width / cell);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < cell; ++dy) {
        for (int dx = 0; dx < cell; ++dx) {
          for (int c = 0; c < img.channels; ++c) {
            sum += img.at(y * cell + dy, x * cell + dx, c);
          }
        }
      }
      const double mean = sum / (static_cast<double>(cell) * cell * img.channels);
      const int t = static_cast<int>(mean * codebook_size);
      grid.at(y, x) = std::clamp(t, 0, codebook_size - 1);
    }
  }
  return grid;
}

}  // namespace mgm
