#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mgm/ops.hpp"
#include "mgm/tensor.hpp"
#include "mgm/tokens.hpp"

namespace mgm {

// Class-label sentinel selecting the learned null-class row (the
// unconditional branch of classifier-free guidance).
inline constexpr int kNullClass = -1;

struct TransformerConfig {
  int hidden_dim = 128;
  int depth = 4;
  int heads = 4;
  int mlp_dim = 512;
  float dropout = 0.1f;
  int codebook_size = 64;  // K
  int num_classes = 2;     // C
  int grid_h = 8;
  int grid_w = 8;

  int grid_size() const { return grid_h * grid_w; }
  int seq_len() const { return grid_size() + 1; }
  // One table holds visual codes, the mask token, class labels, and the
  // null class, in that order.
  int embedding_rows() const { return codebook_size + 1 + num_classes + 1; }
  int mask_row() const { return codebook_size; }
  int class_row(int label) const { return codebook_size + 1 + label; }
  int null_class_row() const { return codebook_size + 1 + num_classes; }
};

// Per-head attention probabilities captured during a forward pass, one
// [seq, seq] tensor per (layer, head); diagnostics only.
struct ForwardTrace {
  std::vector<nn::Tensor> attention_probs;
};

// Bidirectional pre-norm transformer over one class token plus the grid's
// visual tokens. The embedding table doubles as the output head: logits
// are dot products with its rows, keeping only the K visual columns.
class Transformer {
 public:
  Transformer(const TransformerConfig& cfg, Rng& rng);

  const TransformerConfig& config() const { return cfg_; }

  // [seq_len, hidden]: class (or null-class) row at position 0, token rows
  // after, learned positionals added everywhere.
  nn::Tensor embed_inputs(const TokenGrid& tokens, int class_label) const;

  // One residual block: x + MHSA(LN(x)), then + MLP(LN(.)). Dropout hits
  // the attention probabilities and the MLP output only.
  nn::Tensor block_forward(const nn::Tensor& x, int layer, bool dropout_active, Rng* rng,
                           ForwardTrace* trace = nullptr) const;

  // [grid_size, K] logits for the visual positions; the class-token output
  // and the mask/class/null similarity columns are dropped.
  nn::Tensor forward(const TokenGrid& tokens, int class_label, bool dropout_active = false,
                     Rng* rng = nullptr, ForwardTrace* trace = nullptr) const;

  std::vector<nn::Tensor> parameters();
  std::vector<std::pair<std::string, nn::Tensor>> named_parameters();

  nn::Tensor embedding() const { return embedding_; }
  nn::Tensor positional() const { return positional_; }

 private:
  struct Layer {
    nn::Tensor ln1_gain, ln1_bias;
    nn::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Tensor ln2_gain, ln2_bias;
    nn::Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };

  TransformerConfig cfg_;
  nn::Tensor embedding_;   // [K+1+C+1, hidden]
  nn::Tensor positional_;  // [seq_len, hidden]
  std::vector<Layer> layers_;
  nn::Tensor final_gain_, final_bias_;
};

}  // namespace mgm
