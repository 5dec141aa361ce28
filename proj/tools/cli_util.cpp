#include "cli_util.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>

#include "json.hpp"
#include "mgm/error.hpp"

namespace mgm::cli {

namespace fs = std::filesystem;

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const InvalidParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const IndexError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 1;
  }
  return 2;
}

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = load_config(path);
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override must look like section.key=value, got '" + ov + "'");
    }
    apply_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

MarkovCorpusConfig markov_config(const RunConfig& cfg, int grid_h, int grid_w) {
  MarkovCorpusConfig mc;
  mc.classes = cfg.classes;
  mc.codebook_size = cfg.codebook_size;
  mc.grid_h = grid_h;
  mc.grid_w = grid_w;
  mc.sigma = cfg.markov_sigma;
  return mc;
}

TransformerConfig transformer_config(const RunConfig& cfg) {
  TransformerConfig tc;
  tc.hidden_dim = cfg.hidden_dim;
  tc.depth = cfg.depth;
  tc.heads = cfg.heads;
  tc.mlp_dim = cfg.mlp_dim;
  tc.dropout = static_cast<float>(cfg.dropout);
  tc.codebook_size = cfg.codebook_size;
  tc.num_classes = cfg.classes;
  tc.grid_h = cfg.grid_h;
  tc.grid_w = cfg.grid_w;
  return tc;
}

VqConfig vq_config(const RunConfig& cfg) {
  VqConfig vc;
  vc.image_size = cfg.image_size;
  vc.channels = cfg.image_channels;
  vc.codebook_size = cfg.codebook_size;
  vc.code_dim = cfg.code_dim;
  vc.conv_width = cfg.conv_width;
  vc.commitment_beta = static_cast<float>(cfg.commitment_beta);
  return vc;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.lr = static_cast<float>(cfg.lr);
  tc.beta1 = static_cast<float>(cfg.beta1);
  tc.beta2 = static_cast<float>(cfg.beta2);
  tc.weight_decay = static_cast<float>(cfg.weight_decay);
  tc.label_smoothing = static_cast<float>(cfg.label_smoothing);
  tc.cond_drop_prob = static_cast<float>(cfg.cond_drop_prob);
  tc.schedule = cfg.train_schedule;
  tc.seed = cfg.seed;
  tc.checkpoint_every = cfg.checkpoint_every;
  return tc;
}

SamplerConfig sampler_config(const RunConfig& cfg) {
  SamplerConfig sc;
  sc.steps = cfg.steps;
  sc.schedule = cfg.sample_schedule;
  sc.softmax_temp = static_cast<float>(cfg.softmax_temp);
  sc.gumbel_temp = static_cast<float>(cfg.gumbel_temp);
  sc.cfg_weight = static_cast<float>(cfg.cfg_weight);
  sc.seed = cfg.seed;
  sc.snapshot_every = cfg.snapshot_every;
  return sc;
}

std::filesystem::path prepare_run_dir(const RunConfig& cfg) {
  const fs::path root = fs::path(cfg.out_dir) / cfg.run_name;
  fs::create_directories(root / "checkpoints");
  fs::create_directories(root / "samples");
  fs::create_directories(root / "traces");
  std::ofstream out(root / "config.resolved", std::ios::trunc);
  if (!out.good()) throw IoError("cannot write " + (root / "config.resolved").string());
  out << serialize_config(cfg);
  return root;
}

std::filesystem::path run_root_for(const std::string& checkpoint_path,
                                   const std::string& out_override) {
  if (!out_override.empty()) {
    fs::create_directories(out_override);
    return out_override;
  }
  fs::path dir = fs::path(checkpoint_path).parent_path();
  if (dir.filename() == "checkpoints") dir = dir.parent_path();
  if (dir.empty()) dir = ".";
  return dir;
}

namespace {

std::vector<std::pair<Image, int>> load_dataset_images(const RunConfig& cfg) {
  std::vector<std::pair<Image, int>> out;
  for (int c = 0; c < cfg.classes; ++c) {
    const fs::path dir = fs::path(cfg.dataset_dir) / std::to_string(c);
    if (!fs::is_directory(dir)) {
      throw IoError("missing dataset class directory: " + dir.string());
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string ext = entry.path().extension().string();
      if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) {
      Image img = read_image(f);
      if (img.height != cfg.image_size || img.width != cfg.image_size ||
          img.channels != cfg.image_channels) {
        throw ConfigError("dataset image " + f + " does not match data.image_size/" +
                          "data.image_channels");
      }
      out.emplace_back(std::move(img), c);
    }
  }
  if (out.empty()) throw IoError("missing dataset: no PGM/PPM files under " + cfg.dataset_dir);
  return out;
}

}  // namespace

std::vector<std::pair<Image, int>> image_corpus(const RunConfig& cfg, std::uint64_t seed) {
  if (!cfg.dataset_dir.empty()) return load_dataset_images(cfg);
  const int grid = cfg.image_size / VqModel::kDownsample;
  const auto tokens = make_token_corpus(markov_config(cfg, grid, grid), cfg.corpus_per_class, seed);
  std::vector<std::pair<Image, int>> out;
  out.reserve(tokens.size());
  for (const auto& [grid_tokens, label] : tokens) {
    out.emplace_back(render_tokens(grid_tokens, cfg.codebook_size, VqModel::kDownsample), label);
  }
  return out;
}

std::vector<std::pair<TokenGrid, int>> token_corpus(const RunConfig& cfg, std::uint64_t seed) {
  return make_token_corpus(markov_config(cfg, cfg.grid_h, cfg.grid_w), cfg.corpus_per_class,
                           seed);
}

Checkpoint load_checkpoint_kind(const std::string& path, const std::string& kind) {
  Checkpoint ck = load_checkpoint(path);
  const auto it = ck.metadata.find("kind");
  const std::string got = it == ck.metadata.end() ? "unknown" : it->second;
  if (got != kind) {
    throw FormatError(path + " is a '" + got + "' checkpoint, expected '" + kind + "'");
  }
  return ck;
}

RunConfig embedded_config(const Checkpoint& ck, const std::string& path) {
  if (ck.config_text.empty()) throw FormatError(path + " carries no config text");
  RunConfig cfg = parse_config_text(ck.config_text, path);
  cfg.validate();
  return cfg;
}

Transformer restore_transformer(const Checkpoint& ck, const std::string& path) {
  Rng rng(0);
  Transformer model(transformer_config(embedded_config(ck, path)), rng);
  restore_tensors(ck, model.named_parameters());
  return model;
}

VqModel restore_vq(const Checkpoint& ck, const std::string& path) {
  Rng rng(0);
  VqModel model(vq_config(embedded_config(ck, path)), rng);
  restore_tensors(ck, model.named_parameters());
  return model;
}

Image grid_image(const TokenGrid& grid, int codebook_size, const VqModel* vq) {
  if (vq != nullptr) return vq->decode(grid);
  return render_tokens(grid, codebook_size, 4);
}

TokenGrid image_grid(const Image& img, int codebook_size, const VqModel* vq) {
  if (vq != nullptr) return vq->encode(img);
  return tokens_from_render(img, codebook_size, 4);
}

std::vector<std::uint8_t> freeze_from_mask(const Image& mask, int grid_h, int grid_w) {
  if (grid_h < 1 || grid_w < 1 || mask.height % grid_h != 0 || mask.width % grid_w != 0) {
    throw DimensionError("freeze mask dims must be a multiple of the token grid dims");
  }
  const int block_h = mask.height / grid_h;
  const int block_w = mask.width / grid_w;
  const float white = 127.0f / 255.0f;
  std::vector<std::uint8_t> freeze(static_cast<std::size_t>(grid_h) * grid_w, 0);
  for (int y = 0; y < grid_h; ++y) {
    for (int x = 0; x < grid_w; ++x) {
      int hits = 0;
      for (int dy = 0; dy < block_h; ++dy) {
        for (int dx = 0; dx < block_w; ++dx) {
          float v = 0.0f;
          for (int c = 0; c < mask.channels; ++c) {
            v += mask.at(y * block_h + dy, x * block_w + dx, c);
          }
          if (v / mask.channels > white) ++hits;
        }
      }
      freeze[static_cast<std::size_t>(y) * grid_w + x] = 2 * hits > block_h * block_w ? 1 : 0;
    }
  }
  return freeze;
}

void write_trace(const std::filesystem::path& path, const DecodeTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out.good()) throw IoError("cannot write " + path.string());
  for (const DecodeStep& s : trace.steps) {
    const auto remaining =
        std::count_if(s.masked.begin(), s.masked.end(), [](std::uint8_t m) { return m != 0; });
    const nlohmann::json line = {{"step", s.step},
                                 {"remaining_masked", remaining},
                                 {"newly_fixed", s.newly_fixed},
                                 {"gumbel_temp_t", s.gumbel_temp_t},
                                 {"forwards_so_far", s.forwards_so_far}};
    out << line.dump() << '\n';
  }
}

std::pair<Image, Image> snapshot_images(const DecodeStep& step, int grid_h, int grid_w,
                                        int codebook_size, int cell) {
  Image mask = make_image(grid_h * cell, grid_w * cell, 1);
  Image tokens = make_image(grid_h * cell, grid_w * cell, 1);
  for (int y = 0; y < grid_h; ++y) {
    for (int x = 0; x < grid_w; ++x) {
      const bool masked = step.masked[static_cast<std::size_t>(y) * grid_w + x] != 0;
      const int tok = step.tokens.at(y, x);
      const float tok_v =
          masked ? 0.0f : (static_cast<float>(tok) + 0.5f) / static_cast<float>(codebook_size);
      for (int dy = 0; dy < cell; ++dy) {
        for (int dx = 0; dx < cell; ++dx) {
          mask.at(y * cell + dy, x * cell + dx, 0) = masked ? 1.0f : 0.0f;
          tokens.at(y * cell + dy, x * cell + dx, 0) = tok_v;
        }
      }
    }
  }
  return {std::move(mask), std::move(tokens)};
}

}  // namespace mgm::cli
