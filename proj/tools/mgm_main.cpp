#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "cli_util.hpp"
#include "mgm/csvio.hpp"
#include "mgm/error.hpp"
#include "mgm/metrics.hpp"

namespace {

using namespace mgm;
namespace fs = std::filesystem;

struct SamplerFlags {
  int steps = 0;
  std::string schedule;
  double softmax_temp = 0.0;
  double gumbel_temp = 0.0;
  double cfg_weight = 0.0;

  void attach(CLI::App* sub) {
    sub->add_option("--steps", steps, "decode steps T");
    sub->add_option("--schedule", schedule, "mask schedule name");
    sub->add_option("--softmax-temp", softmax_temp, "token sampling temperature");
    sub->add_option("--gumbel-temp", gumbel_temp, "initial confidence noise temperature");
    sub->add_option("--cfg", cfg_weight, "classifier-free guidance weight");
  }

  // Flags the user actually passed override the checkpoint's config.
  void apply(const CLI::App* sub, SamplerConfig& sc) const {
    if (sub->count("--steps") > 0) sc.steps = steps;
    if (sub->count("--schedule") > 0) sc.schedule = schedule_from_name(schedule);
    if (sub->count("--softmax-temp") > 0) sc.softmax_temp = static_cast<float>(softmax_temp);
    if (sub->count("--gumbel-temp") > 0) sc.gumbel_temp = static_cast<float>(gumbel_temp);
    if (sub->count("--cfg") > 0) sc.cfg_weight = static_cast<float>(cfg_weight);
  }
};

// Loads the optional VQ decoder and checks its codebook agrees with the
// transformer's.
std::optional<VqModel> load_tokenizer(const std::string& path, int transformer_k) {
  if (path.empty()) return std::nullopt;
  const Checkpoint ck = cli::load_checkpoint_kind(path, "vq");
  const RunConfig vq_cfg = cli::embedded_config(ck, path);
  if (vq_cfg.codebook_size != transformer_k) {
    throw ConfigError("tokenizer codebook size " + std::to_string(vq_cfg.codebook_size) +
                      " does not match transformer codebook size " +
                      std::to_string(transformer_k));
  }
  return cli::restore_vq(ck, path);
}

int cmd_train_vq(const std::string& config_path, const std::vector<std::string>& overrides) {
  const RunConfig cfg = cli::resolve_config(config_path, overrides);
  const fs::path root = cli::prepare_run_dir(cfg);
  const auto corpus = cli::image_corpus(cfg, derive_seed(cfg.seed, {cli::kSeedData}));

  Rng init_rng(derive_seed(cfg.seed, {cli::kSeedVqInit}));
  VqModel model(cli::vq_config(cfg), init_rng);
  const TrainConfig tc = cli::train_config(cfg);
  nn::AdamW opt(model.parameters(), tc.adamw());

  const int n = static_cast<int>(corpus.size());
  const int batch = std::min(tc.batch_size, n);
  const int steps_per_epoch = n / batch;
  CsvWriter csv((root / "vq_loss.csv").string(), {"epoch", "recon", "codebook", "commitment"});

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Rng shuffle(derive_seed(cfg.seed, {cli::kSeedVqShuffle, static_cast<std::uint64_t>(epoch)}));
    const std::vector<int> perm = shuffle.permutation(n);
    VqLosses sums;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<Image> images;
      images.reserve(batch);
      for (int b = 0; b < batch; ++b) {
        images.push_back(corpus[perm[static_cast<std::size_t>(step) * batch + b]].first);
      }
      Rng rng(derive_seed(cfg.seed, {cli::kSeedVqStep, static_cast<std::uint64_t>(epoch),
                                     static_cast<std::uint64_t>(step)}));
      const VqLosses l = model.train_step(images, opt, rng);
      sums.reconstruction += l.reconstruction;
      sums.codebook += l.codebook;
      sums.commitment += l.commitment;
    }
    csv.row({std::to_string(epoch + 1), format_float(sums.reconstruction / steps_per_epoch),
             format_float(sums.codebook / steps_per_epoch),
             format_float(sums.commitment / steps_per_epoch)});
    csv.flush();
    std::printf("epoch %d recon %.6f\n", epoch + 1, sums.reconstruction / steps_per_epoch);
  }

  Checkpoint ck;
  ck.config_text = serialize_config(cfg);
  ck.metadata["kind"] = "vq";
  ck.metadata["epochs_done"] = std::to_string(tc.epochs);
  ck.tensors = model.named_parameters();
  save_checkpoint((root / "checkpoints" / "vq.ckpt").string(), ck);
  std::printf("wrote %s\n", (root / "checkpoints" / "vq.ckpt").c_str());
  return 0;
}

int cmd_train_transformer(const std::string& config_path,
                          const std::vector<std::string>& overrides,
                          const std::string& tokenizer_path, const std::string& resume_path) {
  const RunConfig cfg = cli::resolve_config(config_path, overrides);
  const fs::path root = cli::prepare_run_dir(cfg);
  std::optional<VqModel> vq = load_tokenizer(tokenizer_path, cfg.codebook_size);

  std::vector<std::pair<TokenGrid, int>> data;
  std::vector<ReferenceDistribution> refs;
  if (cfg.dataset_dir.empty()) {
    data = cli::token_corpus(cfg, derive_seed(cfg.seed, {cli::kSeedData}));
    const MarkovCorpusConfig mc = cli::markov_config(cfg, cfg.grid_h, cfg.grid_w);
    for (int c = 0; c < cfg.classes; ++c) refs.push_back(class_reference(mc, c));
  } else {
    if (!vq) throw ConfigError("training from data.dataset_dir requires --tokenizer");
    std::vector<std::vector<TokenGrid>> by_class(static_cast<std::size_t>(cfg.classes));
    for (const auto& [img, label] : cli::image_corpus(cfg, 0)) {
      TokenGrid grid = vq->encode(img);
      if (grid.height != cfg.grid_h || grid.width != cfg.grid_w) {
        throw ConfigError("encoded grid " + std::to_string(grid.height) + "x" +
                          std::to_string(grid.width) + " does not match transformer.grid_h/w");
      }
      by_class[static_cast<std::size_t>(label)].push_back(grid);
      data.emplace_back(std::move(grid), label);
    }
    for (const auto& grids : by_class) {
      refs.push_back(empirical_reference(grids, cfg.codebook_size));
    }
  }

  Rng init_rng(derive_seed(cfg.seed, {cli::kSeedModelInit}));
  Transformer model(cli::transformer_config(cfg), init_rng);

  TrainerOptions options;
  options.config = cli::train_config(cfg);
  options.eval_sampler = cli::sampler_config(cfg);
  options.eval_sampler.snapshot_every = 0;
  options.csv_path = (root / "metrics.csv").string();
  options.checkpoint_dir = (root / "checkpoints").string();
  options.config_text = serialize_config(cfg);
  nn::AdamW opt(model.parameters(), options.config.adamw());

  int start_epoch = 0;
  if (!resume_path.empty()) {
    const Checkpoint ck = cli::load_checkpoint_kind(resume_path, "transformer");
    if (ck.config_text != options.config_text) {
      throw ConfigError("resume checkpoint was written with a different config than " +
                        config_path);
    }
    restore_train_checkpoint(ck, model, opt);
    start_epoch = static_cast<int>(ck.meta_int("epochs_done", 0));
    std::printf("resuming after %d epochs\n", start_epoch);
  }

  const TrainResult result = train_transformer(model, opt, data, refs, options, start_epoch);
  for (const EpochRow& row : result.rows) {
    std::printf("epoch %d loss %.4f kl %.4f coverage %d\n", row.epoch, row.loss, row.kl,
                row.coverage_tokens);
  }
  std::printf("wrote %s\n", (root / "checkpoints" / "latest.ckpt").c_str());
  return 0;
}

int cmd_sample(const CLI::App* sub, const std::string& ckpt_path, int label, int count,
               const SamplerFlags& flags, bool snapshots, std::uint64_t seed, bool seed_given,
               const std::string& tokenizer_path, const std::string& out_override) {
  const Checkpoint ck = cli::load_checkpoint_kind(ckpt_path, "transformer");
  const RunConfig cfg = cli::embedded_config(ck, ckpt_path);
  const Transformer model = cli::restore_transformer(ck, ckpt_path);
  const std::optional<VqModel> vq = load_tokenizer(tokenizer_path, cfg.codebook_size);

  SamplerConfig sc = cli::sampler_config(cfg);
  flags.apply(sub, sc);
  if (snapshots) sc.snapshot_every = 1;
  const std::uint64_t root_seed = seed_given ? seed : cfg.seed;

  const fs::path root = cli::run_root_for(ckpt_path, out_override);
  fs::create_directories(root / "samples");
  fs::create_directories(root / "traces");

  for (int i = 0; i < count; ++i) {
    sc.seed = derive_seed(root_seed, {cli::kSeedSample, static_cast<std::uint64_t>(i)});
    const DecodeTrace trace = decode(model, label, sc);
    const std::string stem = "sample_" + std::to_string(i);
    const Image img =
        cli::grid_image(trace.final_grid, cfg.codebook_size, vq ? &*vq : nullptr);
    write_image((root / "samples" / (stem + (img.channels == 3 ? ".ppm" : ".pgm"))).string(),
                img);
    cli::write_trace(root / "traces" / (stem + ".jsonl"), trace);
    if (sc.snapshot_every > 0) {
      for (int t : trace.snapshot_steps) {
        const DecodeStep& step = trace.steps[static_cast<std::size_t>(t - 1)];
        const auto [mask_img, token_img] =
            cli::snapshot_images(step, cfg.grid_h, cfg.grid_w, cfg.codebook_size);
        const std::string prefix = stem + "_step_" + std::to_string(t);
        write_image((root / "samples" / (prefix + "_mask.pgm")).string(), mask_img);
        write_image((root / "samples" / (prefix + "_tokens.pgm")).string(), token_img);
      }
    }
  }
  std::printf("wrote %d samples under %s\n", count, (root / "samples").c_str());
  return 0;
}

int cmd_inpaint(const CLI::App* sub, const std::string& ckpt_path, const std::string& image_path,
                const std::string& mask_path, int label, const SamplerFlags& flags,
                std::uint64_t seed, bool seed_given, const std::string& tokenizer_path,
                const std::string& out_override) {
  const Checkpoint ck = cli::load_checkpoint_kind(ckpt_path, "transformer");
  const RunConfig cfg = cli::embedded_config(ck, ckpt_path);
  const Transformer model = cli::restore_transformer(ck, ckpt_path);
  const std::optional<VqModel> vq = load_tokenizer(tokenizer_path, cfg.codebook_size);

  const Image input = read_image(image_path);
  const Image mask = read_image(mask_path);
  if (mask.height != input.height || mask.width != input.width) {
    throw DimensionError("freeze mask " + std::to_string(mask.height) + "x" +
                         std::to_string(mask.width) + " does not match image " +
                         std::to_string(input.height) + "x" + std::to_string(input.width));
  }

  const TokenGrid grid = cli::image_grid(input, cfg.codebook_size, vq ? &*vq : nullptr);
  const std::vector<std::uint8_t> freeze = cli::freeze_from_mask(mask, grid.height, grid.width);

  SamplerConfig sc = cli::sampler_config(cfg);
  flags.apply(sub, sc);
  sc.snapshot_every = 0;
  sc.seed = derive_seed(seed_given ? seed : cfg.seed, {cli::kSeedSample, 0});

  const DecodeTrace trace = inpaint(model, grid, freeze, label, sc);
  for (std::size_t i = 0; i < freeze.size(); ++i) {
    if (freeze[i] != 0 && trace.final_grid.tokens[i] != grid.tokens[i]) {
      throw ContractError("inpaint moved a frozen token");
    }
  }

  const Image out_img =
      cli::grid_image(trace.final_grid, cfg.codebook_size, vq ? &*vq : nullptr);
  if (!vq) {
    // Cell rendering inverts exactly, so re-encoding the output must
    // reproduce the frozen tokens bitwise.
    const TokenGrid back = tokens_from_render(out_img, cfg.codebook_size, 4);
    for (std::size_t i = 0; i < freeze.size(); ++i) {
      if (freeze[i] != 0 && back.tokens[i] != grid.tokens[i]) {
        throw ContractError("re-encoded output lost a frozen token");
      }
    }
  }

  const fs::path root = cli::run_root_for(ckpt_path, out_override);
  fs::create_directories(root / "samples");
  fs::create_directories(root / "traces");
  const fs::path out_path = root / "samples" / (out_img.channels == 3 ? "inpaint.ppm"
                                                                      : "inpaint.pgm");
  write_image(out_path.string(), out_img);
  cli::write_trace(root / "traces" / "inpaint.jsonl", trace);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_ablate(const std::string& ckpt_path, const std::vector<std::string>& schedules,
               const std::vector<int>& steps_list, const std::vector<double>& gumbel_list,
               const std::vector<double>& cfg_list, int per_config, std::uint64_t seed,
               bool seed_given, const std::string& out_override) {
  if (schedules.empty() && steps_list.empty() && gumbel_list.empty() && cfg_list.empty()) {
    throw ConfigError("empty sweep: pass at least one of --schedules/--steps-list/"
                      "--gumbel-list/--cfg-list");
  }
  const Checkpoint ck = cli::load_checkpoint_kind(ckpt_path, "transformer");
  const RunConfig cfg = cli::embedded_config(ck, ckpt_path);
  const Transformer model = cli::restore_transformer(ck, ckpt_path);
  if (per_config < std::max(4, cfg.classes)) {
    throw ConfigError("--per-config must be >= max(4, data.classes) for the k-NN metrics");
  }
  const std::uint64_t root_seed = seed_given ? seed : cfg.seed;
  const SamplerConfig base = cli::sampler_config(cfg);

  std::vector<MaskScheduleId> sched_axis;
  for (const std::string& name : schedules) sched_axis.push_back(schedule_from_name(name));
  if (sched_axis.empty()) sched_axis.push_back(base.schedule);
  const std::vector<int> steps_axis = steps_list.empty() ? std::vector<int>{base.steps}
                                                         : steps_list;
  const std::vector<double> gumbel_axis =
      gumbel_list.empty() ? std::vector<double>{base.gumbel_temp} : gumbel_list;
  const std::vector<double> cfg_axis =
      cfg_list.empty() ? std::vector<double>{base.cfg_weight} : cfg_list;

  // Shared reference set: the training corpus and its exact per-class laws.
  const MarkovCorpusConfig mc = cli::markov_config(cfg, cfg.grid_h, cfg.grid_w);
  std::vector<ReferenceDistribution> refs;
  for (int c = 0; c < cfg.classes; ++c) refs.push_back(class_reference(mc, c));
  const auto ref_corpus = cli::token_corpus(cfg, derive_seed(cfg.seed, {cli::kSeedData}));
  std::vector<Image> ref_images;
  ref_images.reserve(ref_corpus.size());
  for (const auto& [grid, label] : ref_corpus) {
    ref_images.push_back(render_tokens(grid, cfg.codebook_size, 4));
  }
  const FeatureSet ref_feats = image_features(ref_images);

  const fs::path root = cli::run_root_for(ckpt_path, out_override);
  const fs::path out_path = root / "ablate.csv";
  CsvWriter csv(out_path.string(), {"scheduler", "steps", "kl", "frechet", "precision",
                                    "recall", "density", "coverage", "forwards"});

  std::uint64_t cell = 0;
  for (MaskScheduleId sched : sched_axis) {
    for (int steps : steps_axis) {
      for (double gumbel : gumbel_axis) {
        for (double cfg_w : cfg_axis) {
          SamplerConfig sc = base;
          sc.schedule = sched;
          sc.steps = steps;
          sc.gumbel_temp = static_cast<float>(gumbel);
          sc.cfg_weight = static_cast<float>(cfg_w);
          sc.snapshot_every = 0;

          std::vector<std::vector<TokenGrid>> by_class(static_cast<std::size_t>(cfg.classes));
          std::vector<Image> images;
          long long forwards = 0;
          for (int i = 0; i < per_config; ++i) {
            const int label = i % cfg.classes;
            sc.seed = derive_seed(root_seed, {cli::kSeedAblate, cell,
                                              static_cast<std::uint64_t>(i)});
            const DecodeTrace trace = decode(model, label, sc);
            forwards = trace.forward_passes;
            images.push_back(render_tokens(trace.final_grid, cfg.codebook_size, 4));
            by_class[static_cast<std::size_t>(label)].push_back(trace.final_grid);
          }

          double kl = 0.0;
          for (int c = 0; c < cfg.classes; ++c) {
            kl += token_histogram_kl(by_class[static_cast<std::size_t>(c)], refs[c]);
          }
          kl /= cfg.classes;
          const FeatureSet gen_feats = image_features(images);
          const double fr = frechet_distance(ref_feats, gen_feats);
          const auto [precision, recall] = knn_precision_recall(ref_feats, gen_feats, 3);
          const auto [density, coverage] = knn_density_coverage(ref_feats, gen_feats, 3);
          csv.row({schedule_name(sched), std::to_string(steps), format_float(kl),
                   format_float(fr), format_float(precision), format_float(recall),
                   format_float(density), format_float(coverage), std::to_string(forwards)});
          csv.flush();
          ++cell;
        }
      }
    }
  }
  std::printf("wrote %s (%llu rows)\n", out_path.c_str(),
              static_cast<unsigned long long>(cell));
  return 0;
}

int cmd_bench(const std::string& ckpt_path, const std::vector<int>& steps_list,
              const std::vector<double>& cfg_list, int count, const std::string& out_override) {
  const Checkpoint ck = cli::load_checkpoint_kind(ckpt_path, "transformer");
  const RunConfig cfg = cli::embedded_config(ck, ckpt_path);
  const Transformer model = cli::restore_transformer(ck, ckpt_path);
  const SamplerConfig base = cli::sampler_config(cfg);
  if (count < 1) throw ConfigError("--count must be >= 1");

  const std::vector<int> steps_axis = steps_list.empty() ? std::vector<int>{base.steps}
                                                         : steps_list;
  const std::vector<double> cfg_axis =
      cfg_list.empty() ? std::vector<double>{base.cfg_weight} : cfg_list;

  const fs::path root = cli::run_root_for(ckpt_path, out_override);
  const fs::path out_path = root / "bench.csv";
  CsvWriter csv(out_path.string(), {"steps", "cfg_weight", "forwards_parallel",
                                    "forwards_autoregressive", "ratio", "wall_ms"});

  std::uint64_t cell = 0;
  for (int steps : steps_axis) {
    for (double cfg_w : cfg_axis) {
      SamplerConfig sc = base;
      sc.steps = steps;
      sc.cfg_weight = static_cast<float>(cfg_w);
      sc.snapshot_every = 0;

      long long forwards_par = 0;
      long long forwards_ar = 0;
      const auto start = std::chrono::steady_clock::now();
      for (int i = 0; i < count; ++i) {
        sc.seed = derive_seed(1, {cli::kSeedBench, cell, static_cast<std::uint64_t>(i)});
        forwards_par = decode(model, i % cfg.classes, sc).forward_passes;
      }
      const auto mid = std::chrono::steady_clock::now();
      for (int i = 0; i < count; ++i) {
        forwards_ar = autoregressive_baseline(
                          model, i % cfg.classes, base.softmax_temp,
                          derive_seed(2, {cli::kSeedBench, cell, static_cast<std::uint64_t>(i)}))
                          .forward_passes;
      }
      const double wall_ms =
          std::chrono::duration<double, std::milli>(mid - start).count() / count;
      csv.row({std::to_string(steps), format_float(cfg_w), std::to_string(forwards_par),
               std::to_string(forwards_ar),
               format_float(speedup_ratio(forwards_ar, forwards_par)), format_float(wall_ms)});
      csv.flush();
      ++cell;
    }
  }
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked-token generative modeling toolkit"};
  app.require_subcommand(1);

  std::string config_path, tokenizer_path, resume_path, ckpt_path, image_path, mask_path;
  std::string out_override;
  std::vector<std::string> overrides, schedules;
  std::vector<int> steps_list;
  std::vector<double> gumbel_list, cfg_list;
  int label = 0, count = 1, per_config = 16;
  std::uint64_t seed = 0;
  bool snapshots = false;
  SamplerFlags sample_flags, inpaint_flags;

  CLI::App* train_vq = app.add_subcommand("train-vq", "train the image tokenizer");
  train_vq->add_option("--config", config_path, "run config file")->required();
  train_vq->add_option("--set", overrides, "section.key=value override");

  CLI::App* train_tr = app.add_subcommand("train-transformer", "train the masked-token model");
  train_tr->add_option("--config", config_path, "run config file")->required();
  train_tr->add_option("--set", overrides, "section.key=value override");
  train_tr->add_option("--tokenizer", tokenizer_path, "tokenizer checkpoint");
  train_tr->add_option("--resume", resume_path, "transformer checkpoint to continue from");

  CLI::App* sample = app.add_subcommand("sample", "decode images from a trained model");
  sample->add_option("--checkpoint", ckpt_path, "transformer checkpoint")->required();
  sample->add_option("--class", label, "class label")->required();
  sample->add_option("--count", count, "number of samples");
  sample->add_option("--seed", seed, "root seed (default: checkpoint config seed)");
  sample->add_flag("--snapshots", snapshots, "write per-step mask/token images");
  sample->add_option("--tokenizer", tokenizer_path, "decode through this VQ checkpoint");
  sample->add_option("--out", out_override, "output root (default: checkpoint's run dir)");
  sample_flags.attach(sample);

  CLI::App* inpaint_cmd = app.add_subcommand("inpaint", "regenerate the unmasked region");
  inpaint_cmd->add_option("--checkpoint", ckpt_path, "transformer checkpoint")->required();
  inpaint_cmd->add_option("--image", image_path, "input image")->required();
  inpaint_cmd->add_option("--mask", mask_path, "freeze mask image, white = keep")->required();
  inpaint_cmd->add_option("--class", label, "class label")->required();
  inpaint_cmd->add_option("--seed", seed, "root seed (default: checkpoint config seed)");
  inpaint_cmd->add_option("--tokenizer", tokenizer_path, "encode/decode via this VQ checkpoint");
  inpaint_cmd->add_option("--out", out_override, "output root (default: checkpoint's run dir)");
  inpaint_flags.attach(inpaint_cmd);

  CLI::App* ablate = app.add_subcommand("ablate", "sweep sampler settings into a metrics CSV");
  ablate->add_option("--checkpoint", ckpt_path, "transformer checkpoint")->required();
  ablate->add_option("--schedules", schedules, "schedule names")->delimiter(',');
  ablate->add_option("--steps-list", steps_list, "step counts")->delimiter(',');
  ablate->add_option("--gumbel-list", gumbel_list, "gumbel temperatures")->delimiter(',');
  ablate->add_option("--cfg-list", cfg_list, "guidance weights")->delimiter(',');
  ablate->add_option("--per-config", per_config, "samples per swept cell");
  ablate->add_option("--seed", seed, "root seed (default: checkpoint config seed)");
  ablate->add_option("--out", out_override, "output root (default: checkpoint's run dir)");

  CLI::App* bench = app.add_subcommand("bench", "count forward passes and time decoding");
  bench->add_option("--checkpoint", ckpt_path, "transformer checkpoint")->required();
  bench->add_option("--steps-list", steps_list, "step counts")->delimiter(',');
  bench->add_option("--cfg-list", cfg_list, "guidance weights")->delimiter(',');
  bench->add_option("--count", count, "decodes per cell");
  bench->add_option("--out", out_override, "output root (default: checkpoint's run dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  return mgm::cli::run_guarded([&]() -> int {
    if (train_vq->parsed()) return cmd_train_vq(config_path, overrides);
    if (train_tr->parsed()) {
      return cmd_train_transformer(config_path, overrides, tokenizer_path, resume_path);
    }
    if (sample->parsed()) {
      return cmd_sample(sample, ckpt_path, label, count, sample_flags, snapshots, seed,
                        sample->count("--seed") > 0, tokenizer_path, out_override);
    }
    if (inpaint_cmd->parsed()) {
      return cmd_inpaint(inpaint_cmd, ckpt_path, image_path, mask_path, label, inpaint_flags,
                         seed, inpaint_cmd->count("--seed") > 0, tokenizer_path, out_override);
    }
    if (ablate->parsed()) {
      return cmd_ablate(ckpt_path, schedules, steps_list, gumbel_list, cfg_list, per_config,
                        seed, ablate->count("--seed") > 0, out_override);
    }
    if (bench->parsed()) return cmd_bench(ckpt_path, steps_list, cfg_list, count, out_override);
    return 2;
  });
}
