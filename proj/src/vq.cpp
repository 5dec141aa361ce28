#include "mgm/vq.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "mgm/error.hpp"

namespace mgm {

namespace {

using nn::Tensor;

// Flat gather map for a 3x3 convolution with zero padding 1 over a row-major
// [h*w, c] feature map. Output row (oy,ox) holds the 9 taps channel-major by
// tap, matching a [9c, c_out] weight matrix; -1 marks padding.
std::vector<std::int64_t> conv3_map(int h, int w, int c, int stride) {
  const int ho = (h - 1) / stride + 1;
  const int wo = (w - 1) / stride + 1;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(ho) * wo * 9 * c);
  std::size_t at = 0;
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int iy = oy * stride + ky - 1;
          const int ix = ox * stride + kx - 1;
          const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
          for (int ch = 0; ch < c; ++ch) {
            idx[at++] = inside ? (static_cast<std::int64_t>(iy) * w + ix) * c + ch : -1;
          }
        }
      }
    }
  }
  return idx;
}

// Nearest-neighbor 2x upsample of a [h*w, c] map to [(2h)(2w), c].
std::vector<std::int64_t> upsample2_map(int h, int w, int c) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(4) * h * w * c);
  std::size_t at = 0;
  for (int oy = 0; oy < 2 * h; ++oy) {
    for (int ox = 0; ox < 2 * w; ++ox) {
      const std::int64_t src = (static_cast<std::int64_t>(oy / 2) * w + ox / 2) * c;
      for (int ch = 0; ch < c; ++ch) {
        idx[at++] = src + ch;
      }
    }
  }
  return idx;
}

Tensor image_to_tensor(const Image& img) {
  return Tensor::from_data({img.height * img.width, img.channels}, img.pixels);
}

Tensor conv_weight(int fan_in, int fan_out, Rng& rng) {
  return Tensor::randn({fan_in, fan_out}, 1.0f / std::sqrt(static_cast<float>(fan_in)), rng,
                       true);
}

}  // namespace

QuantizeResult quantize(const Tensor& latents, const Tensor& codebook) {
  if (latents.rank() != 2 || codebook.rank() != 2) {
    throw DimensionError("quantize expects rank-2 latents and codebook");
  }
  const int n = latents.dim(0);
  const int d = latents.dim(1);
  const int k = codebook.dim(0);
  if (codebook.dim(1) != d) {
    throw DimensionError("code dim mismatch: latents " + std::to_string(d) + ", codebook " +
                         std::to_string(codebook.dim(1)));
  }

  QuantizeResult out;
  out.indices.resize(n);
  const std::vector<float>& lat = latents.data();
  const std::vector<float>& codes = codebook.data();
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (int j = 0; j < k; ++j) {
      double dist = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = static_cast<double>(lat[static_cast<std::size_t>(i) * d + c]) -
                            static_cast<double>(codes[static_cast<std::size_t>(j) * d + c]);
        dist += diff * diff;
      }
      if (dist < best) {  // strict: equal distance keeps the lower index
        best = dist;
        best_j = j;
      }
    }
    out.indices[i] = best_j;
  }

  const Tensor q = nn::gather_rows(codebook, out.indices);
  out.codebook_loss = nn::mean_squared_error(q, nn::detach(latents));
  out.commitment_loss = nn::mean_squared_error(latents, nn::detach(q));
  // detach(q) + (latents - detach(latents)): forward is exactly q (the
  // residual is exactly zero), backward passes upstream grad to latents.
  out.straight_through = nn::add(nn::detach(q), nn::sub(latents, nn::detach(latents)));
  return out;
}

CodebookUsage codebook_usage(const std::vector<TokenGrid>& grids, int codebook_size) {
  CodebookUsage usage;
  usage.counts.assign(static_cast<std::size_t>(codebook_size), 0);
  std::int64_t total = 0;
  for (const TokenGrid& g : grids) {
    for (int t : g.tokens) {
      if (t < 0 || t >= codebook_size) {
        throw ContractError("codebook_usage saw token " + std::to_string(t) +
                            " outside [0, " + std::to_string(codebook_size) + ")");
      }
      ++usage.counts[static_cast<std::size_t>(t)];
      ++total;
    }
  }
  double entropy = 0.0;
  for (std::int64_t c : usage.counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      entropy -= p * std::log(p);
    }
  }
  usage.perplexity = total > 0 ? std::exp(entropy) : 0.0;
  return usage;
}

VqModel::VqModel(const VqConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.image_size <= 0 || cfg.image_size % kDownsample != 0) {
    throw DimensionError("image_size must be a positive multiple of " +
                         std::to_string(kDownsample) + ", got " +
                         std::to_string(cfg.image_size));
  }
  if (cfg.codebook_size < 2) {
    throw InvalidParameterError("codebook_size must be >= 2");
  }
  const int c = cfg.channels;
  const int w = cfg.conv_width;
  const int d = cfg.code_dim;
  e_w1_ = conv_weight(9 * c, w, rng);
  e_b1_ = Tensor::zeros({w}, true);
  e_w2_ = conv_weight(9 * w, w, rng);
  e_b2_ = Tensor::zeros({w}, true);
  e_w3_ = conv_weight(w, d, rng);
  e_b3_ = Tensor::zeros({d}, true);
  d_w1_ = conv_weight(d, w, rng);
  d_b1_ = Tensor::zeros({w}, true);
  d_w2_ = conv_weight(9 * w, w, rng);
  d_b2_ = Tensor::zeros({w}, true);
  d_w3_ = conv_weight(9 * w, c, rng);
  d_b3_ = Tensor::zeros({c}, true);
  codebook_ = Tensor::zeros({cfg.codebook_size, d}, true);
}

const VqModel::IndexMaps& VqModel::maps_for(int h, int w) const {
  const auto key = std::make_pair(h, w);
  auto it = map_cache_.find(key);
  if (it != map_cache_.end()) {
    return it->second;
  }
  IndexMaps m;
  const int c = cfg_.channels;
  const int cw = cfg_.conv_width;
  m.enc1 = conv3_map(h, w, c, 2);
  m.enc2 = conv3_map(h / 2, w / 2, cw, 2);
  m.up1 = upsample2_map(h / 4, w / 4, cw);
  m.dec1 = conv3_map(h / 2, w / 2, cw, 1);
  m.up2 = upsample2_map(h / 2, w / 2, cw);
  m.dec2 = conv3_map(h, w, cw, 1);
  return map_cache_.emplace(key, std::move(m)).first->second;
}

nn::Tensor VqModel::encode_latents(const Image& img) const {
  if (img.height % kDownsample != 0 || img.width % kDownsample != 0) {
    throw DimensionError("image dims " + std::to_string(img.height) + "x" +
                         std::to_string(img.width) + " not divisible by " +
                         std::to_string(kDownsample));
  }
  if (img.channels != cfg_.channels) {
    throw DimensionError("image has " + std::to_string(img.channels) + " channels, model wants " +
                         std::to_string(cfg_.channels));
  }
  const int h = img.height, w = img.width;
  const IndexMaps& maps = maps_for(h, w);
  const int c = cfg_.channels, cw = cfg_.conv_width;

  Tensor x = image_to_tensor(img);
  x = nn::gather_flat(x, maps.enc1, {h / 2 * (w / 2), 9 * c});
  x = nn::gelu(nn::add_bias_rows(nn::matmul(x, e_w1_), e_b1_));
  x = nn::gather_flat(x, maps.enc2, {h / 4 * (w / 4), 9 * cw});
  x = nn::gelu(nn::add_bias_rows(nn::matmul(x, e_w2_), e_b2_));
  return nn::add_bias_rows(nn::matmul(x, e_w3_), e_b3_);
}

TokenGrid VqModel::encode(const Image& img) const {
  const Tensor latents = encode_latents(img);
  TokenGrid grid(img.height / kDownsample, img.width / kDownsample);
  grid.tokens = quantize(latents, codebook_).indices;
  return grid;
}

nn::Tensor VqModel::decode_latents(const Tensor& latents, int grid_h, int grid_w) const {
  if (latents.rank() != 2 || latents.dim(0) != grid_h * grid_w ||
      latents.dim(1) != cfg_.code_dim) {
    throw DimensionError("decoder input must be [" + std::to_string(grid_h * grid_w) + ", " +
                         std::to_string(cfg_.code_dim) + "], got " + nn::shape_str(latents.shape()));
  }
  const int h = grid_h * kDownsample, w = grid_w * kDownsample;
  const IndexMaps& maps = maps_for(h, w);
  const int cw = cfg_.conv_width;

  Tensor y = nn::gelu(nn::add_bias_rows(nn::matmul(latents, d_w1_), d_b1_));
  y = nn::gather_flat(y, maps.up1, {h / 2 * (w / 2), cw});
  y = nn::gather_flat(y, maps.dec1, {h / 2 * (w / 2), 9 * cw});
  y = nn::gelu(nn::add_bias_rows(nn::matmul(y, d_w2_), d_b2_));
  y = nn::gather_flat(y, maps.up2, {h * w, cw});
  y = nn::gather_flat(y, maps.dec2, {h * w, 9 * cw});
  return nn::add_bias_rows(nn::matmul(y, d_w3_), d_b3_);
}

Image VqModel::decode(const TokenGrid& grid) const {
  for (int i = 0; i < grid.size(); ++i) {
    const int t = grid.tokens[static_cast<std::size_t>(i)];
    if (t < 0 || t >= cfg_.codebook_size) {
      throw InvalidParameterError("cannot decode token " + std::to_string(t) + " at position " +
                                  std::to_string(i) + "; valid ids are [0, " +
                                  std::to_string(cfg_.codebook_size) + ")");
    }
  }
  const Tensor q = nn::gather_rows(codebook_, grid.tokens);
  const Tensor y = decode_latents(q, grid.height, grid.width);

  Image img = make_image(grid.height * kDownsample, grid.width * kDownsample, cfg_.channels);
  const std::vector<float>& vals = y.data();
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = std::clamp(vals[i], 0.0f, 1.0f);
  }
  return img;
}

void VqModel::seed_codebook(const std::vector<Image>& batch, Rng& rng) {
  if (batch.empty()) {
    throw ContractError("cannot seed codebook from an empty batch");
  }
  const int d = cfg_.code_dim;
  const int k = cfg_.codebook_size;
  std::vector<float> pool;
  for (const Image& img : batch) {
    const Tensor lat = encode_latents(img);
    pool.insert(pool.end(), lat.data().begin(), lat.data().end());
  }
  const int rows = static_cast<int>(pool.size()) / d;

  std::vector<int> picks;
  if (rows >= k) {
    picks = rng.sample_without_replacement(rows, k);
  } else {
    picks.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      picks.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(rows))));
    }
  }
  std::vector<float>& codes = codebook_.data();
  for (int j = 0; j < k; ++j) {
    std::copy_n(pool.begin() + static_cast<std::ptrdiff_t>(picks[static_cast<std::size_t>(j)]) * d,
                d, codes.begin() + static_cast<std::ptrdiff_t>(j) * d);
  }

  // Duplicate draws (common on flat toy corpora) would start two codes on
  // identical trajectories forever; jitter repeats until all rows differ.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) {
        if (std::equal(codes.begin() + static_cast<std::ptrdiff_t>(a) * d,
                       codes.begin() + static_cast<std::ptrdiff_t>(a + 1) * d,
                       codes.begin() + static_cast<std::ptrdiff_t>(b) * d)) {
          for (int c = 0; c < d; ++c) {
            codes[static_cast<std::size_t>(b) * d + c] +=
                1e-3f * static_cast<float>(rng.normal());
          }
          changed = true;
        }
      }
    }
  }
  codebook_seeded_ = true;
}

VqLosses VqModel::train_step(const std::vector<Image>& batch, nn::AdamW& opt, Rng& rng) {
  if (batch.empty()) {
    throw ContractError("train_step needs a nonempty batch");
  }
  if (!codebook_seeded_) {
    seed_codebook(batch, rng);
  }

  Tensor recon_sum, codebook_sum, commit_sum;
  for (const Image& img : batch) {
    const Tensor latents = encode_latents(img);
    QuantizeResult q = quantize(latents, codebook_);
    const Tensor recon =
        decode_latents(q.straight_through, img.height / kDownsample, img.width / kDownsample);
    const Tensor target = image_to_tensor(img);
    const Tensor recon_loss = nn::mean_squared_error(recon, target);
    recon_sum = recon_sum.defined() ? nn::add(recon_sum, recon_loss) : recon_loss;
    codebook_sum = codebook_sum.defined() ? nn::add(codebook_sum, q.codebook_loss) : q.codebook_loss;
    commit_sum = commit_sum.defined() ? nn::add(commit_sum, q.commitment_loss) : q.commitment_loss;
  }
  const float inv_b = 1.0f / static_cast<float>(batch.size());
  const Tensor recon = nn::scale(recon_sum, inv_b);
  const Tensor cb_loss = nn::scale(codebook_sum, inv_b);
  const Tensor commitment = nn::scale(commit_sum, inv_b);
  const Tensor total =
      nn::add(nn::add(recon, cb_loss), nn::scale(commitment, cfg_.commitment_beta));

  opt.zero_grad();
  nn::backward(total);
  opt.step();
  return VqLosses{recon.value(), cb_loss.value(), commitment.value()};
}

std::vector<nn::Tensor> VqModel::parameters() {
  std::vector<nn::Tensor> out;
  for (auto& p : named_parameters()) {
    out.push_back(p.second);
  }
  return out;
}

std::vector<std::pair<std::string, nn::Tensor>> VqModel::named_parameters() {
  return {
      {"vq.enc1.weight", e_w1_}, {"vq.enc1.bias", e_b1_}, {"vq.enc2.weight", e_w2_},
      {"vq.enc2.bias", e_b2_},   {"vq.enc3.weight", e_w3_}, {"vq.enc3.bias", e_b3_},
      {"vq.dec1.weight", d_w1_}, {"vq.dec1.bias", d_b1_}, {"vq.dec2.weight", d_w2_},
      {"vq.dec2.bias", d_b2_},   {"vq.dec3.weight", d_w3_}, {"vq.dec3.bias", d_b3_},
      {"vq.codebook", codebook_},
  };
}

}  // namespace mgm
