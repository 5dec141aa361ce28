#pragma once

#include <cstdint>
#include <vector>

#include "mgm/tensor.hpp"

namespace mgm::nn {

struct AdamWConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.96f;
  float weight_decay = 1e-5f;
  float eps = 1e-8f;
};

// Decoupled-weight-decay Adam. Decay is applied to the parameter before
// the adaptive update; both terms scale with lr, so lr == 0 is an exact
// no-op on the parameters.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);

  // One update from the gradients currently stored on the parameters.
  void step();

  void zero_grad();

  std::int64_t step_count() const { return step_count_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Tensor>& params() const { return params_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<float>& first_moment(std::size_t i) { return m_[i]; }
  std::vector<float>& second_moment(std::size_t i) { return v_[i]; }
  void set_step_count(std::int64_t n) { step_count_ = n; }

 private:
  std::vector<Tensor> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::int64_t step_count_ = 0;
};

}  // namespace mgm::nn
