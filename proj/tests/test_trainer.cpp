#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "mgm/corpus.hpp"
#include "mgm/csvio.hpp"
#include "mgm/error.hpp"
#include "mgm/ops.hpp"
#include "mgm/trainer.hpp"

using namespace mgm;

namespace {

std::string temp_dir(const char* name) {
  const std::string dir = std::string("/tmp/mgm_trainer_test_") + name;
  std::filesystem::create_directories(dir);
  return dir;
}

MarkovCorpusConfig sharp_corpus_config() {
  MarkovCorpusConfig cc;
  cc.classes = 2;
  cc.codebook_size = 16;
  cc.grid_h = 4;
  cc.grid_w = 4;
  cc.sigma = 0.25;  // near-deterministic chain, so the loss floor sits well below ln K / 2
  return cc;
}

TransformerConfig tiny_model_config(float dropout = 0.1f) {
  TransformerConfig mc;
  mc.hidden_dim = 64;
  mc.depth = 2;
  mc.heads = 4;
  mc.mlp_dim = 128;
  mc.dropout = dropout;
  mc.codebook_size = 16;
  mc.num_classes = 2;
  mc.grid_h = 4;
  mc.grid_w = 4;
  return mc;
}

Transformer make_model(const TransformerConfig& mc, std::uint64_t seed) {
  Rng rng(seed);
  return Transformer(mc, rng);
}

std::vector<ReferenceDistribution> references(const MarkovCorpusConfig& cc) {
  std::vector<ReferenceDistribution> refs;
  for (int c = 0; c < cc.classes; ++c) refs.push_back(class_reference(cc, c));
  return refs;
}

std::vector<std::vector<float>> snapshot_params(Transformer& model) {
  std::vector<std::vector<float>> out;
  for (const nn::Tensor& p : model.parameters()) out.push_back(p.data());
  return out;
}

TrainerOptions loop_options(std::uint64_t seed) {
  TrainerOptions o;
  o.config.batch_size = 16;
  o.config.epochs = 10;
  o.config.lr = 1e-3f;
  o.config.seed = seed;
  o.config.checkpoint_every = 2;
  o.eval_sampler.steps = 4;
  o.eval_sampler.cfg_weight = 0.0f;
  o.eval_per_class = 4;
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("train config validation rejects out-of-range fields") {
  TrainConfig good;
  CHECK_NOTHROW(good.validate());

  auto expect_reject = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  expect_reject([](TrainConfig& c) { c.batch_size = 0; });
  expect_reject([](TrainConfig& c) { c.epochs = 0; });
  expect_reject([](TrainConfig& c) { c.lr = -1e-4f; });
  expect_reject([](TrainConfig& c) { c.beta1 = 1.0f; });
  expect_reject([](TrainConfig& c) { c.beta2 = -0.1f; });
  expect_reject([](TrainConfig& c) { c.weight_decay = -1.0f; });
  expect_reject([](TrainConfig& c) { c.label_smoothing = 1.0f; });
  expect_reject([](TrainConfig& c) { c.cond_drop_prob = 1.5f; });
  expect_reject([](TrainConfig& c) { c.checkpoint_every = 0; });

  const nn::AdamWConfig ac = good.adamw();
  CHECK(ac.lr == good.lr);
  CHECK(ac.beta1 == good.beta1);
  CHECK(ac.beta2 == good.beta2);
  CHECK(ac.weight_decay == good.weight_decay);
}

TEST_CASE("zero learning rate step leaves parameters bitwise unchanged") {
  const auto corpus = make_token_corpus(sharp_corpus_config(), 16, 7);
  Transformer model = make_model(tiny_model_config(), 11);

  TrainConfig tc;
  tc.lr = 0.0f;
  nn::AdamW opt(model.parameters(), tc.adamw());

  const auto before = snapshot_params(model);
  Rng rng(42);
  const std::vector<std::pair<TokenGrid, int>> batch(corpus.begin(), corpus.begin() + 8);
  const StepStats stats = training_step(model, batch, opt, tc, rng);

  CHECK(std::isfinite(stats.loss));
  CHECK(stats.loss > 0.0f);
  CHECK(stats.used_labels.size() == 8);
  CHECK(stats.masked_counts.size() == 8);
  for (int m : stats.masked_counts) {
    CHECK(m >= 1);
    CHECK(m <= 16);
  }

  const auto after = snapshot_params(model);
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(std::memcmp(before[i].data(), after[i].data(), before[i].size() * sizeof(float)) == 0);
  }
  CHECK(opt.step_count() == 1);
}

TEST_CASE("initial loss sits near the uniform-prediction level for K=64") {
  MarkovCorpusConfig cc = sharp_corpus_config();
  cc.codebook_size = 64;
  cc.sigma = 1.5;
  const auto corpus = make_token_corpus(cc, 16, 7);

  TransformerConfig mc = tiny_model_config(0.0f);
  mc.codebook_size = 64;
  Transformer model = make_model(mc, 11);

  TrainConfig tc;
  tc.lr = 0.0f;
  nn::AdamW opt(model.parameters(), tc.adamw());
  Rng rng(42);
  const std::vector<std::pair<TokenGrid, int>> batch(corpus.begin(), corpus.begin() + 16);
  const StepStats stats = training_step(model, batch, opt, tc, rng);

  const double lnk = std::log(64.0);
  CHECK(stats.loss > 0.9 * lnk);
  CHECK(stats.loss < 1.1 * lnk);
}

TEST_CASE("loss is computed from masked positions only") {
  const auto corpus = make_token_corpus(sharp_corpus_config(), 4, 7);
  Transformer model = make_model(tiny_model_config(0.0f), 11);

  TrainConfig tc;
  tc.lr = 0.0f;
  nn::AdamW opt(model.parameters(), tc.adamw());

  const TokenGrid& grid = corpus[1].first;
  const int label = corpus[1].second;
  Rng rng(42);
  const StepStats stats = training_step(model, {{grid, label}}, opt, tc, rng);

  // Replay the stream: the step draws the mask first, then the label drop.
  Rng replay(42);
  const TrainingMask tm = sample_training_mask(grid.size(), tc.schedule, replay);
  const int used = replay.uniform() < tc.cond_drop_prob ? kNullClass : label;
  CHECK(stats.used_labels[0] == used);
  CHECK(stats.masked_counts[0] == tm.masked_count);

  TokenGrid masked = grid;
  std::vector<int> positions;
  std::vector<int> targets;
  for (int i = 0; i < grid.size(); ++i) {
    if (!tm.mask[static_cast<std::size_t>(i)]) continue;
    masked.tokens[static_cast<std::size_t>(i)] = mask_id(16);
    positions.push_back(i);
    targets.push_back(grid.tokens[static_cast<std::size_t>(i)]);
  }
  REQUIRE(!positions.empty());

  const nn::Tensor logits = model.forward(masked, used);
  const nn::Tensor sub = nn::gather_rows(logits, positions);
  const nn::Tensor ce = nn::cross_entropy_label_smoothed(sub, targets, tc.label_smoothing);
  CHECK(stats.loss == ce.value());

  // Zeroing every unmasked logit row does not move the loss.
  std::vector<float> doctored = logits.data();
  for (int i = 0; i < grid.size(); ++i) {
    if (tm.mask[static_cast<std::size_t>(i)]) continue;
    for (int k = 0; k < 16; ++k) doctored[static_cast<std::size_t>(i) * 16 + k] = 0.0f;
  }
  const nn::Tensor zeroed = nn::Tensor::from_data(logits.shape(), doctored);
  const nn::Tensor sub2 = nn::gather_rows(zeroed, positions);
  const nn::Tensor ce2 = nn::cross_entropy_label_smoothed(sub2, targets, tc.label_smoothing);
  CHECK(ce2.value() == ce.value());
}

TEST_CASE("condition dropout extremes pin the used labels") {
  const auto corpus = make_token_corpus(sharp_corpus_config(), 8, 7);
  Transformer model = make_model(tiny_model_config(), 11);
  const std::vector<std::pair<TokenGrid, int>> batch(corpus.begin(), corpus.begin() + 8);

  TrainConfig tc;
  tc.lr = 0.0f;

  SUBCASE("always dropped") {
    tc.cond_drop_prob = 1.0f;
    nn::AdamW opt(model.parameters(), tc.adamw());
    Rng rng(5);
    const StepStats stats = training_step(model, batch, opt, tc, rng);
    for (int used : stats.used_labels) CHECK(used == kNullClass);
  }
  SUBCASE("never dropped") {
    tc.cond_drop_prob = 0.0f;
    nn::AdamW opt(model.parameters(), tc.adamw());
    Rng rng(5);
    const StepStats stats = training_step(model, batch, opt, tc, rng);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(stats.used_labels[i] == batch[i].second);
    }
  }
}

TEST_CASE("invalid training batches are rejected") {
  Transformer model = make_model(tiny_model_config(), 11);
  TrainConfig tc;
  nn::AdamW opt(model.parameters(), tc.adamw());
  Rng rng(1);

  CHECK_THROWS_AS(training_step(model, {}, opt, tc, rng), ContractError);

  TokenGrid has_mask(4, 4, 0);
  has_mask.tokens[5] = mask_id(16);
  CHECK_THROWS_AS(training_step(model, {{has_mask, 0}}, opt, tc, rng), ContractError);

  const TokenGrid ok(4, 4, 3);
  CHECK_THROWS_AS(training_step(model, {{ok, -1}}, opt, tc, rng), IndexError);
  CHECK_THROWS_AS(training_step(model, {{ok, 2}}, opt, tc, rng), IndexError);
}

TEST_CASE("fixed seed reproduces the loss sequence") {
  const auto corpus = make_token_corpus(sharp_corpus_config(), 32, 7);
  TrainConfig tc;
  tc.lr = 1e-3f;

  auto run = [&](std::uint64_t stream_root) {
    Transformer model = make_model(tiny_model_config(), 11);
    nn::AdamW opt(model.parameters(), tc.adamw());
    std::vector<float> losses;
    for (int step = 0; step < 5; ++step) {
      std::vector<std::pair<TokenGrid, int>> batch(corpus.begin() + step * 4,
                                                   corpus.begin() + step * 4 + 4);
      Rng rng(derive_seed(stream_root, {static_cast<std::uint64_t>(step)}));
      losses.push_back(training_step(model, batch, opt, tc, rng).loss);
    }
    return losses;
  };

  const std::vector<float> a = run(9);
  const std::vector<float> b = run(9);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);

  const std::vector<float> c = run(10);
  CHECK(a != c);
}

TEST_CASE("two thousand steps halve the training loss") {
  const auto corpus = make_token_corpus(sharp_corpus_config(), 128, 7);
  Transformer model = make_model(tiny_model_config(), 11);

  TrainConfig tc;
  tc.batch_size = 16;
  tc.lr = 1e-3f;
  nn::AdamW opt(model.parameters(), tc.adamw());

  const auto n = static_cast<std::uint64_t>(corpus.size());
  float first = 0.0f;
  double tail = 0.0;
  for (int step = 0; step < 2000; ++step) {
    Rng pick(derive_seed(3, {static_cast<std::uint64_t>(step)}));
    std::vector<std::pair<TokenGrid, int>> batch;
    for (int b = 0; b < tc.batch_size; ++b) batch.push_back(corpus[pick.below(n)]);
    Rng rng(derive_seed(4, {static_cast<std::uint64_t>(step)}));
    const float loss = training_step(model, batch, opt, tc, rng).loss;
    if (step == 0) first = loss;
    if (step >= 1990) tail += loss;
  }
  const double tail_mean = tail / 10.0;

  // Random init predicts near-uniform, so the first step sits at ~ln K.
  CHECK(first > 0.9 * std::log(16.0));
  CHECK(first < 1.1 * std::log(16.0));
  CHECK(tail_mean < 0.5 * first);
}

TEST_CASE("epoch loop writes rows, csv, and checkpoints") {
  const MarkovCorpusConfig cc = sharp_corpus_config();
  const auto corpus = make_token_corpus(cc, 64, 7);
  const auto refs = references(cc);
  Transformer model = make_model(tiny_model_config(), 11);

  const std::string dir = temp_dir("loop");
  TrainerOptions options = loop_options(1);
  options.csv_path = dir + "/train.csv";
  options.checkpoint_dir = dir;
  options.config_text = "[run]\nrun_name = loop\n";

  nn::AdamW opt(model.parameters(), options.config.adamw());
  const TrainResult res = train_transformer(model, opt, corpus, refs, options);

  REQUIRE(res.rows.size() == 10);
  CHECK(res.total_steps == 80);  // 128 grids / batch 16 = 8 steps, 10 epochs
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const EpochRow& r = res.rows[i];
    CHECK(r.epoch == static_cast<int>(i) + 1);
    CHECK(std::isfinite(r.loss));
    CHECK(std::isfinite(r.kl));
    CHECK(r.kl >= 0.0);
    CHECK(r.coverage_tokens >= 1);
    CHECK(r.coverage_tokens <= 16);
  }
  CHECK(res.rows.back().loss < 0.5f * res.rows.front().loss);
  CHECK(res.rows.back().kl < res.rows.front().kl);

  const CsvTable csv = read_csv(options.csv_path);
  REQUIRE(csv.header == std::vector<std::string>{"epoch", "loss", "kl", "coverage_tokens"});
  REQUIRE(csv.rows.size() == 10);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    CHECK(std::stoi(csv.rows[i][0]) == res.rows[i].epoch);
    CHECK(std::stof(csv.rows[i][1]) == res.rows[i].loss);
    CHECK(std::stod(csv.rows[i][2]) == res.rows[i].kl);
    CHECK(std::stoi(csv.rows[i][3]) == res.rows[i].coverage_tokens);
  }

  for (int e : {2, 4, 6, 8, 10}) {
    CHECK(std::filesystem::exists(dir + "/epoch_" + std::to_string(e) + ".ckpt"));
  }
  for (int e : {1, 3, 5, 7, 9}) {
    CHECK(!std::filesystem::exists(dir + "/epoch_" + std::to_string(e) + ".ckpt"));
  }
  CHECK(slurp(dir + "/latest.ckpt") == slurp(dir + "/epoch_10.ckpt"));

  const Checkpoint latest = load_checkpoint(dir + "/latest.ckpt");
  CHECK(latest.meta_int("epochs_done", -1) == 10);
  CHECK(latest.meta_int("opt_steps", -1) == 80);
  CHECK(latest.config_text == options.config_text);
}

TEST_CASE("epoch csv is identical across reruns") {
  const MarkovCorpusConfig cc = sharp_corpus_config();
  const auto corpus = make_token_corpus(cc, 32, 7);
  const auto refs = references(cc);
  const std::string dir = temp_dir("rerun");

  auto run = [&](const char* csv_name) {
    Transformer model = make_model(tiny_model_config(), 11);
    TrainerOptions options = loop_options(1);
    options.config.epochs = 3;
    options.csv_path = dir + "/" + csv_name;
    nn::AdamW opt(model.parameters(), options.config.adamw());
    train_transformer(model, opt, corpus, refs, options);
  };
  run("a.csv");
  run("b.csv");
  CHECK(slurp(dir + "/a.csv") == slurp(dir + "/b.csv"));
}

TEST_CASE("interrupted training resumes bitwise") {
  const MarkovCorpusConfig cc = sharp_corpus_config();
  const auto corpus = make_token_corpus(cc, 64, 7);
  const auto refs = references(cc);
  const std::string dir = temp_dir("resume");

  TrainerOptions options = loop_options(1);
  options.config.epochs = 6;
  options.config.checkpoint_every = 3;
  options.checkpoint_dir = dir;
  options.config_text = "[run]\nrun_name = resume\n";

  Transformer straight = make_model(tiny_model_config(), 11);
  nn::AdamW opt_straight(straight.parameters(), options.config.adamw());
  const TrainResult res_straight =
      train_transformer(straight, opt_straight, corpus, refs, options);
  REQUIRE(res_straight.rows.size() == 6);

  // First half only, into its own directory.
  const std::string half_dir = temp_dir("resume_half");
  Transformer half = make_model(tiny_model_config(), 11);
  nn::AdamW opt_half(half.parameters(), options.config.adamw());
  TrainerOptions half_options = options;
  half_options.config.epochs = 3;
  half_options.checkpoint_dir = half_dir;
  train_transformer(half, opt_half, corpus, refs, half_options);

  // Restore into a model with unrelated init; everything must come from disk.
  Transformer resumed = make_model(tiny_model_config(), 999);
  nn::AdamW opt_resumed(resumed.parameters(), options.config.adamw());
  const Checkpoint ck = load_checkpoint(half_dir + "/epoch_3.ckpt");
  restore_train_checkpoint(ck, resumed, opt_resumed);
  CHECK(opt_resumed.step_count() == opt_half.step_count());

  const TrainResult res_resumed =
      train_transformer(resumed, opt_resumed, corpus, refs, options,
                        static_cast<int>(ck.meta_int("epochs_done", 0)));

  REQUIRE(res_resumed.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const EpochRow& a = res_straight.rows[3 + i];
    const EpochRow& b = res_resumed.rows[i];
    CHECK(a.epoch == b.epoch);
    CHECK(a.loss == b.loss);
    CHECK(a.kl == b.kl);
    CHECK(a.coverage_tokens == b.coverage_tokens);
  }

  const auto named_a = straight.named_parameters();
  const auto named_b = resumed.named_parameters();
  REQUIRE(named_a.size() == named_b.size());
  for (std::size_t i = 0; i < named_a.size(); ++i) {
    const auto& da = named_a[i].second.data();
    const auto& db = named_b[i].second.data();
    REQUIRE(da.size() == db.size());
    CHECK(std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) == 0);
    const auto& ma = opt_straight.first_moment(i);
    const auto& mb = opt_resumed.first_moment(i);
    CHECK(std::memcmp(ma.data(), mb.data(), ma.size() * sizeof(float)) == 0);
    const auto& va = opt_straight.second_moment(i);
    const auto& vb = opt_resumed.second_moment(i);
    CHECK(std::memcmp(va.data(), vb.data(), va.size() * sizeof(float)) == 0);
  }
  CHECK(opt_straight.step_count() == opt_resumed.step_count());

  // The resumed run refreshes the shared checkpoints.
  CHECK(slurp(dir + "/latest.ckpt") == slurp(dir + "/epoch_6.ckpt"));
}

TEST_CASE("train checkpoint restore validates moment tensors") {
  Transformer model = make_model(tiny_model_config(), 11);
  TrainConfig tc;
  nn::AdamW opt(model.parameters(), tc.adamw());
  const Checkpoint ck = make_train_checkpoint(model, opt, 4, "[run]\nrun_name = x\n");

  const auto named = model.named_parameters();
  CHECK(ck.tensors.size() == named.size() * 3);
  CHECK(ck.meta_int("epochs_done", -1) == 4);
  CHECK(ck.meta_int("opt_steps", -1) == 0);

  Transformer target = make_model(tiny_model_config(), 22);
  nn::AdamW target_opt(target.parameters(), tc.adamw());

  SUBCASE("foreign checkpoint kind") {
    Checkpoint foreign = ck;
    foreign.metadata["kind"] = "vq";
    CHECK_THROWS_AS(restore_train_checkpoint(foreign, target, target_opt), FormatError);
  }
  SUBCASE("missing moment tensor") {
    Checkpoint broken = ck;
    const std::string victim = "opt." + named[0].first + ".m1";
    for (auto it = broken.tensors.begin(); it != broken.tensors.end(); ++it) {
      if (it->first == victim) {
        broken.tensors.erase(it);
        break;
      }
    }
    CHECK_THROWS_AS(restore_train_checkpoint(broken, target, target_opt), FormatError);
  }
  SUBCASE("moment tensor with the wrong size") {
    Checkpoint broken = ck;
    for (auto& [name, tensor] : broken.tensors) {
      if (name == "opt." + named[0].first + ".m2") {
        tensor = nn::Tensor::from_data({1}, {0.0f});
        break;
      }
    }
    CHECK_THROWS_AS(restore_train_checkpoint(broken, target, target_opt), DimensionError);
  }
  SUBCASE("intact checkpoint restores moments and counters") {
    Rng rng(8);
    const auto corpus = make_token_corpus(sharp_corpus_config(), 8, 7);
    TrainConfig train_tc;
    train_tc.lr = 1e-3f;
    nn::AdamW live(model.parameters(), train_tc.adamw());
    const std::vector<std::pair<TokenGrid, int>> batch(corpus.begin(), corpus.begin() + 4);
    training_step(model, batch, live, train_tc, rng);
    const Checkpoint live_ck = make_train_checkpoint(model, live, 1, "");

    restore_train_checkpoint(live_ck, target, target_opt);
    CHECK(target_opt.step_count() == 1);
    const auto target_named = target.named_parameters();
    for (std::size_t i = 0; i < named.size(); ++i) {
      CHECK(target_named[i].second.data() == named[i].second.data());
      CHECK(target_opt.first_moment(i) == live.first_moment(i));
      CHECK(target_opt.second_moment(i) == live.second_moment(i));
    }
  }
}

TEST_CASE("train loop input contracts") {
  const MarkovCorpusConfig cc = sharp_corpus_config();
  const auto corpus = make_token_corpus(cc, 4, 7);
  const auto refs = references(cc);
  Transformer model = make_model(tiny_model_config(), 11);
  TrainerOptions options = loop_options(1);
  options.config.epochs = 2;
  nn::AdamW opt(model.parameters(), options.config.adamw());

  CHECK_THROWS_AS(train_transformer(model, opt, {}, refs, options), ContractError);
  CHECK_THROWS_AS(train_transformer(model, opt, corpus, {}, options), ContractError);

  TrainerOptions bad = options;
  bad.eval_per_class = 0;
  CHECK_THROWS_AS(train_transformer(model, opt, corpus, refs, bad), ConfigError);
  CHECK_THROWS_AS(train_transformer(model, opt, corpus, refs, options, 3), ConfigError);
  CHECK_THROWS_AS(train_transformer(model, opt, corpus, refs, options, -1), ConfigError);

  // A dataset smaller than the batch trains on the whole set each step.
  const TrainResult res = train_transformer(model, opt, corpus, refs, options);
  CHECK(res.total_steps == 2);
  CHECK(res.rows.size() == 2);
}
