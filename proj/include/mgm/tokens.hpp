#pragma once

#include <vector>

#include "mgm/error.hpp"

namespace mgm {

// Grid of discrete codebook indices. Valid entries are [0, K) plus the
// reserved mask id K; the tokenizer itself never emits the mask id.
struct TokenGrid {
  int height = 0;
  int width = 0;
  std::vector<int> tokens;

  TokenGrid() = default;
  TokenGrid(int h, int w, int fill = 0)
      : height(h), width(w), tokens(static_cast<std::size_t>(h) * w, fill) {}

  int size() const { return height * width; }
  int at(int y, int x) const { return tokens[static_cast<std::size_t>(y) * width + x]; }
  int& at(int y, int x) { return tokens[static_cast<std::size_t>(y) * width + x]; }
};

// The mask token shares the id space with the codebook, one past the last
// real code.
inline int mask_id(int codebook_size) { return codebook_size; }

}  // namespace mgm
