#include "mgm/config.hpp"

#include <cctype>
#include <functional>
#include <fstream>
#include <sstream>
#include <vector>

#include "mgm/csvio.hpp"
#include "mgm/error.hpp"

namespace mgm {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> print;
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

long long parse_ll(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not an integer: '" + v + "'");
  }
}

double parse_d(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number: '" + v + "'");
  }
}

// One schema entry per config field, in canonical order.
const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    auto add_int = [&f](const char* sec, const char* key, int RunConfig::* member) {
      f.push_back({sec, key,
                   [member, sec, key](RunConfig& c, const std::string& v) {
                     c.*member = static_cast<int>(
                         parse_ll(v, std::string(sec) + "." + key));
                   },
                   [member](const RunConfig& c) { return std::to_string(c.*member); }});
    };
    auto add_u64 = [&f](const char* sec, const char* key, std::uint64_t RunConfig::* member) {
      f.push_back({sec, key,
                   [member, sec, key](RunConfig& c, const std::string& v) {
                     c.*member = static_cast<std::uint64_t>(
                         parse_ll(v, std::string(sec) + "." + key));
                   },
                   [member](const RunConfig& c) { return std::to_string(c.*member); }});
    };
    auto add_double = [&f](const char* sec, const char* key, double RunConfig::* member) {
      f.push_back({sec, key,
                   [member, sec, key](RunConfig& c, const std::string& v) {
                     c.*member = parse_d(v, std::string(sec) + "." + key);
                   },
                   [member](const RunConfig& c) { return format_float(c.*member); }});
    };
    auto add_string = [&f](const char* sec, const char* key, std::string RunConfig::* member) {
      f.push_back({sec, key,
                   [member](RunConfig& c, const std::string& v) { c.*member = v; },
                   [member](const RunConfig& c) { return c.*member; }});
    };
    auto add_schedule = [&f](const char* sec, const char* key, MaskScheduleId RunConfig::* member) {
      f.push_back({sec, key,
                   [member, sec, key](RunConfig& c, const std::string& v) {
                     try {
                       c.*member = schedule_from_name(v);
                     } catch (const InvalidParameterError& e) {
                       throw ConfigError(std::string(sec) + "." + key + ": " + e.what());
                     }
                   },
                   [member](const RunConfig& c) { return schedule_name(c.*member); }});
    };

    add_string("run", "name", &RunConfig::run_name);
    add_string("run", "out_dir", &RunConfig::out_dir);
    add_u64("run", "seed", &RunConfig::seed);

    add_string("data", "dataset_dir", &RunConfig::dataset_dir);
    add_int("data", "classes", &RunConfig::classes);
    add_int("data", "image_size", &RunConfig::image_size);
    add_int("data", "image_channels", &RunConfig::image_channels);
    add_int("data", "corpus_per_class", &RunConfig::corpus_per_class);
    add_double("data", "markov_sigma", &RunConfig::markov_sigma);

    add_int("tokenizer", "codebook_size", &RunConfig::codebook_size);
    add_int("tokenizer", "code_dim", &RunConfig::code_dim);
    add_int("tokenizer", "conv_width", &RunConfig::conv_width);
    add_double("tokenizer", "commitment_beta", &RunConfig::commitment_beta);

    add_int("transformer", "hidden_dim", &RunConfig::hidden_dim);
    add_int("transformer", "depth", &RunConfig::depth);
    add_int("transformer", "heads", &RunConfig::heads);
    add_int("transformer", "mlp_dim", &RunConfig::mlp_dim);
    add_double("transformer", "dropout", &RunConfig::dropout);
    add_int("transformer", "grid_h", &RunConfig::grid_h);
    add_int("transformer", "grid_w", &RunConfig::grid_w);

    add_int("train", "batch_size", &RunConfig::batch_size);
    add_int("train", "epochs", &RunConfig::epochs);
    add_double("train", "lr", &RunConfig::lr);
    add_double("train", "beta1", &RunConfig::beta1);
    add_double("train", "beta2", &RunConfig::beta2);
    add_double("train", "weight_decay", &RunConfig::weight_decay);
    add_double("train", "label_smoothing", &RunConfig::label_smoothing);
    add_double("train", "cond_drop_prob", &RunConfig::cond_drop_prob);
    add_schedule("train", "schedule", &RunConfig::train_schedule);
    add_int("train", "checkpoint_every", &RunConfig::checkpoint_every);

    add_int("sampler", "steps", &RunConfig::steps);
    add_schedule("sampler", "schedule", &RunConfig::sample_schedule);
    add_double("sampler", "softmax_temp", &RunConfig::softmax_temp);
    add_double("sampler", "gumbel_temp", &RunConfig::gumbel_temp);
    add_double("sampler", "cfg_weight", &RunConfig::cfg_weight);
    add_int("sampler", "snapshot_every", &RunConfig::snapshot_every);
    return f;
  }();
  return fields;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : schema()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::validate() const {
  require(classes >= 1, "data.classes must be >= 1");
  require(image_channels == 1 || image_channels == 3, "data.image_channels must be 1 or 3");
  require(image_size >= 4 && image_size % 4 == 0, "data.image_size must be a positive multiple of 4");
  require(corpus_per_class >= 1, "data.corpus_per_class must be >= 1");
  require(markov_sigma > 0.0, "data.markov_sigma must be > 0");
  require(codebook_size >= 2, "tokenizer.codebook_size must be >= 2");
  require(code_dim >= 1, "tokenizer.code_dim must be >= 1");
  require(conv_width >= 1, "tokenizer.conv_width must be >= 1");
  require(commitment_beta >= 0.0, "tokenizer.commitment_beta must be >= 0");
  require(hidden_dim >= 1, "transformer.hidden_dim must be >= 1");
  require(depth >= 1, "transformer.depth must be >= 1");
  require(heads >= 1 && hidden_dim % heads == 0,
          "transformer.hidden_dim must be divisible by transformer.heads");
  require(mlp_dim >= hidden_dim, "transformer.mlp_dim must be >= transformer.hidden_dim");
  require(dropout >= 0.0 && dropout < 1.0, "transformer.dropout must lie in [0,1)");
  require(grid_h >= 1 && grid_w >= 1, "transformer.grid_h/grid_w must be >= 1");
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(epochs >= 1, "train.epochs must be >= 1");
  require(lr >= 0.0, "train.lr must be >= 0");
  require(beta1 > 0.0 && beta1 < 1.0, "train.beta1 must lie in (0,1)");
  require(beta2 > 0.0 && beta2 < 1.0, "train.beta2 must lie in (0,1)");
  require(weight_decay >= 0.0, "train.weight_decay must be >= 0");
  require(label_smoothing >= 0.0 && label_smoothing < 1.0,
          "train.label_smoothing must lie in [0,1)");
  require(cond_drop_prob >= 0.0 && cond_drop_prob <= 1.0,
          "train.cond_drop_prob must lie in [0,1]");
  require(checkpoint_every >= 1, "train.checkpoint_every must be >= 1");
  require(steps >= 1, "sampler.steps must be >= 1");
  require(softmax_temp > 0.0, "sampler.softmax_temp must be > 0");
  require(gumbel_temp >= 0.0, "sampler.gumbel_temp must be >= 0");
  require(cfg_weight >= 0.0, "sampler.cfg_weight must be >= 0");
  require(snapshot_every >= 0, "sampler.snapshot_every must be >= 0");
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": unterminated section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value', got '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' before any [section]");
    const Field* f = find_field(section, key);
    if (f == nullptr) {
      throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
    }
    f->parse(cfg, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return parse_config_text(body.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const Field& f : schema()) {
    if (f.section != section) {
      if (!section.empty()) out << "\n";
      section = f.section;
      out << "[" << section << "]\n";
    }
    out << f.key << " = " << f.print(cfg) << "\n";
  }
  return out.str();
}

void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const std::size_t dot = dotted_key.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("override key must be section.key, got '" + dotted_key + "'");
  }
  const Field* f = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (f == nullptr) throw ConfigError("unknown key '" + dotted_key + "'");
  f->parse(cfg, value);
  cfg.validate();
}

}  // namespace mgm
