#include "mgm/adamw.hpp"

#include <cmath>

#include "mgm/error.hpp"

namespace mgm::nn {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.beta1 > 0.0f && cfg_.beta1 < 1.0f && cfg_.beta2 > 0.0f && cfg_.beta2 < 1.0f)) {
    throw InvalidParameterError("AdamW betas must lie in (0,1)");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.requires_grad()) {
      throw ContractError("AdamW parameter without requires_grad");
    }
    m_.emplace_back(p.numel(), 0.0f);
    v_.emplace_back(p.numel(), 0.0f);
  }
}

void AdamW::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), step_count_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), step_count_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].data();
    const auto& g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    if (g.size() != p.size()) {
      throw DimensionError("AdamW: gradient/parameter size mismatch");
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] -= cfg_.lr * cfg_.weight_decay * p[j];
      m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g[j] * g[j];
      const float mhat = static_cast<float>(m[j] / bc1);
      const float vhat = static_cast<float>(v[j] / bc2);
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace mgm::nn
