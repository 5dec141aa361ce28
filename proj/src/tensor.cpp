#include "mgm/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "mgm/error.hpp"

namespace mgm::nn {

std::size_t numel_of(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) {
      throw DimensionError("negative dimension in shape " + shape_str(shape));
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  const std::size_t n = numel_of(shape);
  impl->shape = std::move(shape);
  impl->data.assign(n, value);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(n, 0.0f);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data, bool requires_grad) {
  const std::size_t n = numel_of(shape);
  if (data.size() != n) {
    throw DimensionError("from_data: shape " + shape_str(shape) + " wants " + std::to_string(n) +
                         " values, got " + std::to_string(data.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(n, 0.0f);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, float stddev, Rng& rng, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (float& v : t.data()) {
    v = stddev * static_cast<float>(rng.normal());
  }
  return t;
}

static TensorImpl& deref(const std::shared_ptr<TensorImpl>& p) {
  if (!p) throw ContractError("use of undefined Tensor");
  return *p;
}

const std::vector<int>& Tensor::shape() const { return deref(impl_).shape; }
int Tensor::rank() const { return static_cast<int>(deref(impl_).shape.size()); }

int Tensor::dim(int i) const {
  const auto& s = deref(impl_).shape;
  if (i < 0 || i >= static_cast<int>(s.size())) {
    throw IndexError("dim " + std::to_string(i) + " out of range for shape " + shape_str(s));
  }
  return s[static_cast<std::size_t>(i)];
}

std::size_t Tensor::numel() const { return deref(impl_).data.size(); }

std::vector<float>& Tensor::data() { return deref(impl_).data; }
const std::vector<float>& Tensor::data() const { return deref(impl_).data; }

std::vector<float>& Tensor::grad() {
  auto& impl = deref(impl_);
  if (!impl.requires_grad) throw ContractError("grad() on tensor without requires_grad");
  return impl.grad;
}

const std::vector<float>& Tensor::grad() const {
  const auto& impl = deref(impl_);
  if (!impl.requires_grad) throw ContractError("grad() on tensor without requires_grad");
  return impl.grad;
}

bool Tensor::requires_grad() const { return deref(impl_).requires_grad; }

float Tensor::value() const {
  const auto& impl = deref(impl_);
  if (impl.data.size() != 1) {
    throw ContractError("value() on non-scalar tensor of shape " + shape_str(impl.shape));
  }
  return impl.data[0];
}

void Tensor::zero_grad() {
  auto& impl = deref(impl_);
  if (impl.requires_grad) std::fill(impl.grad.begin(), impl.grad.end(), 0.0f);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  TensorImpl* root = loss.impl().get();
  if (!root->requires_grad) return;

  // Iterative postorder DFS over grad-requiring ancestors.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    const std::size_t top = stack.size() - 1;
    TensorImpl* node = stack[top].node;
    bool descended = false;
    while (stack[top].next_parent < node->parents.size()) {
      TensorImpl* p = node->parents[stack[top].next_parent++].get();
      if (p->requires_grad && seen.insert(p).second) {
        stack.push_back({p, 0});
        descended = true;
        break;
      }
    }
    if (!descended) {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorImpl* n : order) {
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0f);
  }
  root->grad[0] += 1.0f;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace mgm::nn
