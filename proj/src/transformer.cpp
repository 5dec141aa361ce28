#include "mgm/transformer.hpp"

#include <cmath>
#include <numeric>

#include "mgm/error.hpp"

namespace mgm {

using nn::Tensor;

namespace {

void validate_config(const TransformerConfig& cfg) {
  if (cfg.hidden_dim <= 0 || cfg.depth <= 0 || cfg.heads <= 0 || cfg.mlp_dim <= 0 ||
      cfg.grid_h <= 0 || cfg.grid_w <= 0 || cfg.codebook_size < 2 || cfg.num_classes < 1) {
    throw InvalidParameterError("transformer config dimensions must be positive");
  }
  if (cfg.hidden_dim % cfg.heads != 0) {
    throw InvalidParameterError("hidden_dim " + std::to_string(cfg.hidden_dim) +
                                " not divisible by heads " + std::to_string(cfg.heads));
  }
  if (cfg.mlp_dim < cfg.hidden_dim) {
    throw InvalidParameterError("mlp_dim must be >= hidden_dim");
  }
  if (!(cfg.dropout >= 0.0f && cfg.dropout < 1.0f)) {
    throw InvalidParameterError("dropout must lie in [0,1)");
  }
}

constexpr float kInitStd = 0.02f;

}  // namespace

Transformer::Transformer(const TransformerConfig& cfg, Rng& rng) : cfg_(cfg) {
  validate_config(cfg);
  const int h = cfg.hidden_dim;
  embedding_ = Tensor::randn({cfg.embedding_rows(), h}, kInitStd, rng, true);
  positional_ = Tensor::randn({cfg.seq_len(), h}, kInitStd, rng, true);
  layers_.resize(static_cast<std::size_t>(cfg.depth));
  for (Layer& l : layers_) {
    l.ln1_gain = Tensor::full({h}, 1.0f, true);
    l.ln1_bias = Tensor::zeros({h}, true);
    l.wq = Tensor::randn({h, h}, kInitStd, rng, true);
    l.bq = Tensor::zeros({h}, true);
    l.wk = Tensor::randn({h, h}, kInitStd, rng, true);
    l.bk = Tensor::zeros({h}, true);
    l.wv = Tensor::randn({h, h}, kInitStd, rng, true);
    l.bv = Tensor::zeros({h}, true);
    l.wo = Tensor::randn({h, h}, kInitStd, rng, true);
    l.bo = Tensor::zeros({h}, true);
    l.ln2_gain = Tensor::full({h}, 1.0f, true);
    l.ln2_bias = Tensor::zeros({h}, true);
    l.mlp_w1 = Tensor::randn({h, cfg.mlp_dim}, kInitStd, rng, true);
    l.mlp_b1 = Tensor::zeros({cfg.mlp_dim}, true);
    l.mlp_w2 = Tensor::randn({cfg.mlp_dim, h}, kInitStd, rng, true);
    l.mlp_b2 = Tensor::zeros({h}, true);
  }
  final_gain_ = Tensor::full({h}, 1.0f, true);
  final_bias_ = Tensor::zeros({h}, true);
}

nn::Tensor Transformer::embed_inputs(const TokenGrid& tokens, int class_label) const {
  if (tokens.size() != cfg_.grid_size()) {
    throw DimensionError("token grid is " + std::to_string(tokens.height) + "x" +
                         std::to_string(tokens.width) + ", model wants " +
                         std::to_string(cfg_.grid_h) + "x" + std::to_string(cfg_.grid_w));
  }
  if (class_label != kNullClass && (class_label < 0 || class_label >= cfg_.num_classes)) {
    throw IndexError("class label " + std::to_string(class_label) + " outside [0, " +
                     std::to_string(cfg_.num_classes) + ") and not the null sentinel");
  }

  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(cfg_.seq_len()));
  rows.push_back(class_label == kNullClass ? cfg_.null_class_row() : cfg_.class_row(class_label));
  for (int t : tokens.tokens) {
    if (t < 0 || t > cfg_.codebook_size) {
      throw IndexError("token id " + std::to_string(t) + " outside [0, " +
                       std::to_string(cfg_.codebook_size) + "]");
    }
    rows.push_back(t);  // visual rows coincide with token ids; mask id K is row K
  }
  return nn::add(nn::gather_rows(embedding_, rows), positional_);
}

nn::Tensor Transformer::block_forward(const Tensor& x, int layer, bool dropout_active, Rng* rng,
                                      ForwardTrace* trace) const {
  if (layer < 0 || layer >= cfg_.depth) {
    throw IndexError("layer " + std::to_string(layer) + " outside depth " +
                     std::to_string(cfg_.depth));
  }
  const bool drops = dropout_active && cfg_.dropout > 0.0f;
  if (drops && rng == nullptr) {
    throw ContractError("dropout_active forward needs an rng");
  }
  const Layer& l = layers_[static_cast<std::size_t>(layer)];
  const int dh = cfg_.hidden_dim / cfg_.heads;
  const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));

  Tensor h = nn::layer_norm(x, l.ln1_gain, l.ln1_bias);
  const Tensor q = nn::add_bias_rows(nn::matmul(h, l.wq), l.bq);
  const Tensor k = nn::add_bias_rows(nn::matmul(h, l.wk), l.bk);
  const Tensor v = nn::add_bias_rows(nn::matmul(h, l.wv), l.bv);

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(cfg_.heads));
  for (int i = 0; i < cfg_.heads; ++i) {
    const Tensor qi = nn::slice_cols(q, i * dh, dh);
    const Tensor ki = nn::slice_cols(k, i * dh, dh);
    const Tensor vi = nn::slice_cols(v, i * dh, dh);
    const Tensor scores = nn::scale(nn::matmul(qi, ki, false, true), inv_sqrt_dh);
    Tensor probs = nn::softmax_with_temperature(scores, 1.0f);
    if (trace != nullptr) {
      trace->attention_probs.push_back(probs);
    }
    if (drops) {
      probs = nn::dropout(probs, cfg_.dropout, true, *rng);
    }
    head_outputs.push_back(nn::matmul(probs, vi));
  }
  const Tensor attn = nn::add_bias_rows(nn::matmul(nn::concat_cols(head_outputs), l.wo), l.bo);
  Tensor out = nn::add(x, attn);

  Tensor m = nn::layer_norm(out, l.ln2_gain, l.ln2_bias);
  m = nn::gelu(nn::add_bias_rows(nn::matmul(m, l.mlp_w1), l.mlp_b1));
  m = nn::add_bias_rows(nn::matmul(m, l.mlp_w2), l.mlp_b2);
  if (drops) {
    m = nn::dropout(m, cfg_.dropout, true, *rng);
  }
  return nn::add(out, m);
}

nn::Tensor Transformer::forward(const TokenGrid& tokens, int class_label, bool dropout_active,
                                Rng* rng, ForwardTrace* trace) const {
  Tensor x = embed_inputs(tokens, class_label);
  for (int layer = 0; layer < cfg_.depth; ++layer) {
    x = block_forward(x, layer, dropout_active, rng, trace);
  }
  x = nn::layer_norm(x, final_gain_, final_bias_);

  // Dot products against every embedding row; only the K visual columns
  // survive, and the class-token position is not a prediction site.
  const Tensor similarities = nn::matmul(x, embedding_, false, true);
  const Tensor visual_cols = nn::slice_cols(similarities, 0, cfg_.codebook_size);
  std::vector<int> visual_positions(static_cast<std::size_t>(cfg_.grid_size()));
  std::iota(visual_positions.begin(), visual_positions.end(), 1);
  return nn::gather_rows(visual_cols, visual_positions);
}

std::vector<nn::Tensor> Transformer::parameters() {
  std::vector<Tensor> out;
  for (auto& p : named_parameters()) {
    out.push_back(p.second);
  }
  return out;
}

std::vector<std::pair<std::string, nn::Tensor>> Transformer::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("tf.embedding", embedding_);
  out.emplace_back("tf.positional", positional_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& l = layers_[i];
    const std::string p = "tf.layer" + std::to_string(i) + ".";
    out.emplace_back(p + "ln1.gain", l.ln1_gain);
    out.emplace_back(p + "ln1.bias", l.ln1_bias);
    out.emplace_back(p + "wq", l.wq);
    out.emplace_back(p + "bq", l.bq);
    out.emplace_back(p + "wk", l.wk);
    out.emplace_back(p + "bk", l.bk);
    out.emplace_back(p + "wv", l.wv);
    out.emplace_back(p + "bv", l.bv);
    out.emplace_back(p + "wo", l.wo);
    out.emplace_back(p + "bo", l.bo);
    out.emplace_back(p + "ln2.gain", l.ln2_gain);
    out.emplace_back(p + "ln2.bias", l.ln2_bias);
    out.emplace_back(p + "mlp.w1", l.mlp_w1);
    out.emplace_back(p + "mlp.b1", l.mlp_b1);
    out.emplace_back(p + "mlp.w2", l.mlp_w2);
    out.emplace_back(p + "mlp.b2", l.mlp_b2);
  }
  out.emplace_back("tf.final_ln.gain", final_gain_);
  out.emplace_back("tf.final_ln.bias", final_bias_);
  return out;
}

}  // namespace mgm
