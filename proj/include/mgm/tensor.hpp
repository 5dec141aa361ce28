#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mgm/rng.hpp"

namespace mgm::nn {

struct TensorImpl;

// Value handle onto a node of the autodiff tape. Copies share storage.
// Data is row-major float32; rank-0 tensors (empty shape) are scalars.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, float value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);
  static Tensor randn(std::vector<int> shape, float stddev, Rng& rng,
                      bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const;
  int dim(int i) const;
  std::size_t numel() const;

  std::vector<float>& data();
  const std::vector<float>& data() const;
  std::vector<float>& grad();
  const std::vector<float>& grad() const;
  bool requires_grad() const;

  // Scalar read; ContractError unless numel() == 1.
  float value() const;

  void zero_grad();

  std::shared_ptr<TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;  // numel-sized iff requires_grad
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;
  // Scalar reductions keep their double accumulation here (NaN otherwise) so
  // finite-difference quotients are not limited to float32 loss resolution.
  double scalar_double = std::numeric_limits<double>::quiet_NaN();

  bool is_leaf() const { return parents.empty(); }
};

std::size_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
// calls; intermediate gradients are reset at entry. Explicit zero_grad()
// on leaves between optimizer steps.
void backward(const Tensor& loss);

}  // namespace mgm::nn
