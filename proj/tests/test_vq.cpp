#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mgm/adamw.hpp"
#include "mgm/error.hpp"
#include "mgm/fdcheck.hpp"
#include "mgm/image.hpp"
#include "mgm/ops.hpp"
#include "mgm/rng.hpp"
#include "mgm/tokens.hpp"
#include "mgm/vq.hpp"

using namespace mgm;
using nn::Tensor;

namespace {

// Two-class toy corpus: smooth ramps (horizontal or vertical) with
// per-image amplitude and offset, so nearby patches repeat across images.
std::vector<Image> ramp_corpus(int count, int size, Rng& rng) {
  std::vector<Image> out;
  for (int i = 0; i < count; ++i) {
    Image img = make_image(size, size, 1);
    const bool horizontal = i % 2 == 0;
    const float amp = 0.4f + 0.5f * static_cast<float>(rng.uniform());
    const float off = 0.05f * static_cast<float>(rng.uniform());
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const float t = static_cast<float>(horizontal ? x : y) / static_cast<float>(size - 1);
        img.at(y, x, 0) = off + amp * t;
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

double round_trip_mse(const VqModel& model, const Image& img) {
  const Image recon = model.decode(model.encode(img));
  double sum = 0.0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double d = static_cast<double>(recon.pixels[i]) - static_cast<double>(img.pixels[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(img.pixels.size());
}

}  // namespace

TEST_CASE("quantize maps a latent equal to a code onto that code with zero losses") {
  const Tensor codebook = Tensor::from_data({4, 2}, {0, 0, 1, 0, 2, 5, -3, 4});
  const Tensor latents = Tensor::from_data({1, 2}, {2, 5});
  const QuantizeResult q = quantize(latents, codebook);
  CHECK(q.indices == std::vector<int>{2});
  CHECK(q.codebook_loss.value() == 0.0f);
  CHECK(q.commitment_loss.value() == 0.0f);
  CHECK(q.straight_through.data() == std::vector<float>{2, 5});
}

TEST_CASE("quantize breaks exact ties toward the lowest code index") {
  const Tensor codebook = Tensor::from_data({3, 2}, {0, 0, 2, 0, 2, 0});
  const Tensor latents = Tensor::from_data({2, 2}, {1, 0, 2, 0});
  const QuantizeResult q = quantize(latents, codebook);
  CHECK(q.indices[0] == 0);  // equidistant between codes 0 and 1
  CHECK(q.indices[1] == 1);  // codes 1 and 2 identical
}

TEST_CASE("quantize agrees with an exhaustive nearest-neighbor scan") {
  Rng rng(901);
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(63));
    const int n = 1 + static_cast<int>(rng.below(256));
    const int d = 1 + static_cast<int>(rng.below(8));
    const Tensor codebook = Tensor::randn({k, d}, 1.0f, rng);
    const Tensor latents = Tensor::randn({n, d}, 1.0f, rng);
    const QuantizeResult q = quantize(latents, codebook);

    for (int i = 0; i < n; ++i) {
      std::vector<double> dist(static_cast<std::size_t>(k), 0.0);
      for (int j = 0; j < k; ++j) {
        for (int c = 0; c < d; ++c) {
          const double diff =
              static_cast<double>(latents.data()[static_cast<std::size_t>(i) * d + c]) -
              static_cast<double>(codebook.data()[static_cast<std::size_t>(j) * d + c]);
          dist[static_cast<std::size_t>(j)] += diff * diff;
        }
      }
      const int want =
          static_cast<int>(std::min_element(dist.begin(), dist.end()) - dist.begin());
      REQUIRE(q.indices[static_cast<std::size_t>(i)] == want);
    }
  }
}

TEST_CASE("quantize rejects mismatched code dimensions") {
  const Tensor codebook = Tensor::from_data({2, 3}, {0, 0, 0, 1, 1, 1});
  const Tensor latents = Tensor::from_data({1, 2}, {0, 0});
  CHECK_THROWS_AS(quantize(latents, codebook), DimensionError);
}

TEST_CASE("straight-through output carries the code values bitwise") {
  Rng rng(77);
  const Tensor codebook = Tensor::randn({8, 3}, 1.0f, rng, true);
  const Tensor latents = Tensor::randn({16, 3}, 1.0f, rng, true);
  const QuantizeResult q = quantize(latents, codebook);
  const Tensor direct = nn::gather_rows(codebook, q.indices);
  CHECK(q.straight_through.data() == direct.data());
}

TEST_CASE("straight-through copies the downstream gradient onto the latents") {
  Rng rng(78);
  const Tensor codebook = Tensor::randn({8, 3}, 1.0f, rng);
  const Tensor latents = Tensor::randn({16, 3}, 1.0f, rng, true);
  const QuantizeResult q = quantize(latents, codebook);
  const Tensor weights = Tensor::randn({16, 3}, 1.0f, rng);

  nn::backward(nn::sum(nn::mul(nn::mul(q.straight_through, q.straight_through), weights)));

  // Same loss with the quantized values as an independent leaf: the leaf's
  // gradient must land on the latents element for element.
  const Tensor leaf = Tensor::from_data({16, 3}, q.straight_through.data(), true);
  nn::backward(nn::sum(nn::mul(nn::mul(leaf, leaf), weights)));
  CHECK(latents.grad() == leaf.grad());
}

TEST_CASE("quantize losses pull the expected side of the bottleneck") {
  Rng rng(79);
  Tensor codebook = Tensor::randn({4, 2}, 1.0f, rng, true);
  Tensor latents = Tensor::randn({6, 2}, 1.0f, rng, true);
  const QuantizeResult q = quantize(latents, codebook);

  nn::backward(q.codebook_loss);
  CHECK(std::any_of(codebook.grad().begin(), codebook.grad().end(),
                    [](float g) { return g != 0.0f; }));
  CHECK(std::all_of(latents.grad().begin(), latents.grad().end(),
                    [](float g) { return g == 0.0f; }));

  codebook.zero_grad();
  nn::backward(q.commitment_loss);
  CHECK(std::all_of(codebook.grad().begin(), codebook.grad().end(),
                    [](float g) { return g == 0.0f; }));
  CHECK(std::any_of(latents.grad().begin(), latents.grad().end(),
                    [](float g) { return g != 0.0f; }));
}

TEST_CASE("encoder maps a 32x32 image onto an 8x8 grid of valid tokens") {
  Rng rng(111);
  VqConfig cfg;
  VqModel model(cfg, rng);
  std::vector<Image> batch = ramp_corpus(2, 32, rng);
  model.seed_codebook(batch, rng);

  const TokenGrid grid = model.encode(batch[0]);
  CHECK(grid.height == 8);
  CHECK(grid.width == 8);
  REQUIRE(grid.size() == 64);
  for (int t : grid.tokens) {
    CHECK(t >= 0);
    CHECK(t < cfg.codebook_size);  // never the mask id
  }

  const TokenGrid again = model.encode(batch[0]);
  CHECK(grid.tokens == again.tokens);
}

TEST_CASE("encoder rejects images the downsampler cannot tile") {
  Rng rng(112);
  VqConfig cfg;
  VqModel model(cfg, rng);
  CHECK_THROWS_AS(model.encode(make_image(30, 32, 1)), DimensionError);
  CHECK_THROWS_AS(model.encode(make_image(32, 32, 3)), DimensionError);
}

TEST_CASE("decoder rejects grids containing the mask id") {
  Rng rng(113);
  VqConfig cfg;
  cfg.image_size = 8;
  cfg.conv_width = 4;
  cfg.codebook_size = 4;
  cfg.code_dim = 2;
  VqModel model(cfg, rng);

  TokenGrid grid(2, 2);
  grid.at(1, 1) = mask_id(cfg.codebook_size);
  CHECK_THROWS_AS(model.decode(grid), InvalidParameterError);
  CHECK_THROWS_WITH_AS(model.decode(grid), doctest::Contains("position 3"),
                       InvalidParameterError);
}

TEST_CASE("decoder output is deterministic and stays inside [0,1]") {
  Rng rng(114);
  VqConfig cfg;
  cfg.image_size = 16;
  cfg.conv_width = 8;
  VqModel model(cfg, rng);
  model.seed_codebook(ramp_corpus(2, 16, rng), rng);

  TokenGrid grid(4, 4);
  for (int i = 0; i < grid.size(); ++i) {
    grid.tokens[static_cast<std::size_t>(i)] = i % cfg.codebook_size;
  }
  const Image a = model.decode(grid);
  const Image b = model.decode(grid);
  CHECK(a.pixels == b.pixels);
  CHECK(a.height == 16);
  CHECK(a.width == 16);
  for (float p : a.pixels) {
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
  }
}

TEST_CASE("codebook seeding fills every code with a distinct finite vector") {
  Rng rng(115);
  VqConfig cfg;
  cfg.image_size = 16;
  cfg.conv_width = 8;
  cfg.codebook_size = 16;
  cfg.code_dim = 4;
  VqModel model(cfg, rng);
  CHECK_FALSE(model.codebook_seeded());

  // Constant images give many identical latents, exercising the jitter path.
  std::vector<Image> batch{make_image(16, 16, 1, 0.5f), make_image(16, 16, 1, 0.5f)};
  model.seed_codebook(batch, rng);
  CHECK(model.codebook_seeded());

  const std::vector<float>& codes = model.codebook().data();
  const int d = cfg.code_dim;
  for (float v : codes) {
    CHECK(std::isfinite(v));
  }
  for (int a = 0; a < cfg.codebook_size; ++a) {
    for (int b = a + 1; b < cfg.codebook_size; ++b) {
      CHECK_FALSE(std::equal(codes.begin() + a * d, codes.begin() + (a + 1) * d,
                             codes.begin() + b * d));
    }
  }
}

TEST_CASE("training loss gradients match finite differences through the bottleneck") {
  Rng rng(116);
  VqConfig cfg;
  cfg.image_size = 8;
  cfg.conv_width = 4;
  cfg.codebook_size = 4;
  cfg.code_dim = 2;
  VqModel model(cfg, rng);
  const std::vector<Image> batch = ramp_corpus(1, 8, rng);
  model.seed_codebook(batch, rng);

  const auto make_loss = [&] {
    const Tensor latents = model.encode_latents(batch[0]);
    QuantizeResult q = quantize(latents, model.codebook());
    const Tensor recon = model.decode_latents(q.straight_through, 2, 2);
    const Tensor target = Tensor::from_data({64, 1}, batch[0].pixels);
    return nn::add(nn::add(nn::mean_squared_error(recon, target), q.codebook_loss),
                   nn::scale(q.commitment_loss, cfg.commitment_beta));
  };

  std::vector<Tensor> decoder_params;
  for (auto& p : model.named_parameters()) {
    if (p.first.find("dec") != std::string::npos) {
      decoder_params.push_back(p.second);
    }
  }
  REQUIRE(decoder_params.size() == 6);
  // Forward passes run in float32, so central differences carry ~1.4e-7 of
  // absolute slope noise at this h; slopes below 3e-4 are checked against
  // the absolute tolerance where that noise is far inside the margin.
  const nn::FdReport report =
      nn::finite_difference_check(make_loss, decoder_params, {.h = 2e-2f, .near_zero = 3e-4f});
  CAPTURE(report.max_rel_err);
  CAPTURE(report.max_abs_err);
  CHECK(report.within(1e-3f, 1e-5f));
}

TEST_CASE("a zero learning rate step computes losses without moving parameters") {
  Rng rng(117);
  VqConfig cfg;
  cfg.image_size = 16;
  cfg.conv_width = 8;
  VqModel model(cfg, rng);
  const std::vector<Image> batch = ramp_corpus(4, 16, rng);
  model.seed_codebook(batch, rng);

  std::vector<std::vector<float>> before;
  for (auto& p : model.parameters()) {
    before.push_back(p.data());
  }
  nn::AdamWConfig oc;
  oc.lr = 0.0f;
  nn::AdamW opt(model.parameters(), oc);
  const VqLosses losses = model.train_step(batch, opt, rng);
  CHECK(std::isfinite(losses.total()));
  CHECK(losses.reconstruction > 0.0);

  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(params[i].data() == before[i]);
  }
}

TEST_CASE("train_step refuses an empty batch") {
  Rng rng(118);
  VqConfig cfg;
  cfg.image_size = 8;
  cfg.conv_width = 4;
  VqModel model(cfg, rng);
  nn::AdamW opt(model.parameters(), {});
  CHECK_THROWS_AS(model.train_step({}, opt, rng), ContractError);
}

TEST_CASE("training drives the loss down on a 16-image corpus") {
  Rng rng(119);
  VqConfig cfg;
  cfg.image_size = 16;
  cfg.conv_width = 8;
  cfg.codebook_size = 16;
  cfg.code_dim = 4;
  VqModel model(cfg, rng);
  const std::vector<Image> corpus = ramp_corpus(16, 16, rng);

  nn::AdamWConfig oc;
  oc.lr = 3e-3f;
  nn::AdamW opt(model.parameters(), oc);

  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    const VqLosses l = model.train_step(corpus, opt, rng);
    if (step == 0) {
      first = l.total();
    }
    last = l.total();
  }
  CHECK(last < first);
}

TEST_CASE("a converged model re-encodes its own decodes to a fixed token grid") {
  Rng rng(122);
  VqConfig cfg;
  cfg.image_size = 16;
  cfg.conv_width = 8;
  cfg.codebook_size = 8;
  cfg.code_dim = 2;
  VqModel model(cfg, rng);
  const std::vector<Image> corpus = ramp_corpus(4, 16, rng);

  // Train, then anneal at a 30x smaller rate: the property needs a model
  // that has stopped drifting, not just one with a low loss snapshot.
  nn::AdamWConfig oc;
  oc.lr = 3e-3f;
  nn::AdamW opt(model.parameters(), oc);
  for (int step = 0; step < 1200; ++step) {
    model.train_step(corpus, opt, rng);
  }
  nn::AdamWConfig fine;
  fine.lr = 1e-4f;
  nn::AdamW opt2(model.parameters(), fine);
  for (int step = 0; step < 300; ++step) {
    model.train_step(corpus, opt2, rng);
  }
  double worst = 0.0;
  for (const Image& img : corpus) {
    worst = std::max(worst, round_trip_mse(model, img));
  }
  REQUIRE(worst <= 2e-3);  // convergence is the precondition of the property

  for (const Image& img : corpus) {
    const TokenGrid once = model.encode(model.decode(model.encode(img)));
    const TokenGrid twice = model.encode(model.decode(once));
    CHECK(once.tokens == twice.tokens);
  }
}

TEST_CASE("a constant-color corpus reconstructs to under 1e-3 MSE") {
  Rng rng(120);
  VqConfig cfg;
  cfg.image_size = 16;
  cfg.conv_width = 8;
  cfg.codebook_size = 8;
  cfg.code_dim = 2;
  VqModel model(cfg, rng);
  std::vector<Image> corpus;
  for (float v : {0.2f, 0.4f, 0.6f, 0.8f}) {
    corpus.push_back(make_image(16, 16, 1, v));
  }

  nn::AdamWConfig oc;
  oc.lr = 3e-3f;
  nn::AdamW opt(model.parameters(), oc);
  for (int step = 0; step < 400; ++step) {
    model.train_step(corpus, opt, rng);
  }
  for (const Image& img : corpus) {
    CHECK(round_trip_mse(model, img) < 1e-3);
  }
}

TEST_CASE("codebook usage counts tokens and reports perplexity") {
  SUBCASE("collapsed usage has perplexity one") {
    TokenGrid grid(4, 4, 7);
    const CodebookUsage u = codebook_usage({grid, grid}, 64);
    CHECK(u.counts[7] == 32);
    CHECK(u.perplexity == doctest::Approx(1.0));
  }
  SUBCASE("uniform usage over K codes has perplexity K") {
    TokenGrid grid(8, 8);
    for (int i = 0; i < 64; ++i) {
      grid.tokens[static_cast<std::size_t>(i)] = i;
    }
    const CodebookUsage u = codebook_usage({grid}, 64);
    CHECK(u.perplexity == doctest::Approx(64.0));
  }
  SUBCASE("counts match a direct tally") {
    Rng rng(121);
    std::vector<TokenGrid> grids;
    std::vector<std::int64_t> tally(16, 0);
    for (int g = 0; g < 5; ++g) {
      TokenGrid grid(3, 5);
      for (int i = 0; i < grid.size(); ++i) {
        const int t = static_cast<int>(rng.below(16));
        grid.tokens[static_cast<std::size_t>(i)] = t;
        ++tally[static_cast<std::size_t>(t)];
      }
      grids.push_back(std::move(grid));
    }
    const CodebookUsage u = codebook_usage(grids, 16);
    CHECK(u.counts == tally);
  }
  SUBCASE("mask tokens are rejected") {
    TokenGrid grid(2, 2);
    grid.at(0, 1) = mask_id(16);
    CHECK_THROWS_AS(codebook_usage({grid}, 16), ContractError);
  }
}
