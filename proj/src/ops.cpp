#include "mgm/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "mgm/error.hpp"

namespace mgm::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Tensor make_node(std::vector<int> shape, std::vector<float> data, const char* op,
                 std::vector<std::shared_ptr<TensorImpl>> parents,
                 std::function<void(TensorImpl&)> backward_fn) {
  bool needs_grad = false;
  for (const auto& p : parents) {
    if (p->requires_grad) {
      needs_grad = true;
      break;
    }
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->op = op;
  impl->requires_grad = needs_grad;
  if (needs_grad) {
    impl->grad.assign(impl->data.size(), 0.0f);
    impl->parents = std::move(parents);
    impl->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(impl));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Best scalar value available: the double side-channel when a reduction set
// it, otherwise the stored float32. NaN for non-scalars.
double scalar_refined(const TensorImpl& t) {
  if (!std::isnan(t.scalar_double)) return t.scalar_double;
  if (t.data.size() == 1) return static_cast<double>(t.data[0]);
  return std::numeric_limits<double>::quiet_NaN();
}

// Rows/cols view of an arbitrary-rank tensor, last dimension = cols.
std::pair<int, int> rows_cols_last(const Tensor& x, const char* op) {
  if (x.rank() < 1) {
    throw DimensionError(std::string(op) + ": needs rank >= 1, got shape " + shape_str(x.shape()));
  }
  const int cols = x.dim(x.rank() - 1);
  if (cols < 1) {
    throw DimensionError(std::string(op) + ": empty last dimension in " + shape_str(x.shape()));
  }
  const int rows = static_cast<int>(x.numel() / static_cast<std::size_t>(cols));
  return {rows, cols};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tensor node =
      make_node(a.shape(), std::move(out), "add", {a.impl(), b.impl()}, [](TensorImpl& self) {
        for (auto& parent : self.parents) {
          if (!parent->requires_grad) continue;
          for (std::size_t i = 0; i < self.grad.size(); ++i) parent->grad[i] += self.grad[i];
        }
      });
  if (node.numel() == 1) {
    node.impl()->scalar_double = scalar_refined(*a.impl()) + scalar_refined(*b.impl());
  }
  return node;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<float> out(a.numel());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  Tensor node =
      make_node(a.shape(), std::move(out), "sub", {a.impl(), b.impl()}, [](TensorImpl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
        }
      });
  if (node.numel() == 1) {
    node.impl()->scalar_double = scalar_refined(*a.impl()) - scalar_refined(*b.impl());
  }
  return node;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tensor node =
      make_node(a.shape(), std::move(out), "mul", {a.impl(), b.impl()}, [](TensorImpl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pb.grad[i] += self.grad[i] * pa.data[i];
        }
      });
  if (node.numel() == 1) {
    node.impl()->scalar_double = scalar_refined(*a.impl()) * scalar_refined(*b.impl());
  }
  return node;
}

Tensor scale(const Tensor& a, float s) {
  std::vector<float> out(a.numel());
  const auto& ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * ad[i];
  Tensor node = make_node(a.shape(), std::move(out), "scale", {a.impl()}, [s](TensorImpl& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += s * self.grad[i];
  });
  if (node.numel() == 1) {
    node.impl()->scalar_double = static_cast<double>(s) * scalar_refined(*a.impl());
  }
  return node;
}

Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_bias_rows: x " + shape_str(x.shape()) + " vs bias " +
                         shape_str(bias.shape()));
  }
  const int m = x.dim(0), n = x.dim(1);
  std::vector<float> out(x.numel());
  const auto& xd = x.data();
  const auto& bd = bias.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out[static_cast<std::size_t>(i) * n + j] = xd[static_cast<std::size_t>(i) * n + j] + bd[j];
    }
  }
  return make_node(x.shape(), std::move(out), "add_bias_rows", {x.impl(), bias.impl()},
                   [m, n](TensorImpl& self) {
                     auto& px = *self.parents[0];
                     auto& pb = *self.parents[1];
                     if (px.requires_grad) {
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         px.grad[i] += self.grad[i];
                       }
                     }
                     if (pb.requires_grad) {
                       for (int i = 0; i < m; ++i) {
                         for (int j = 0; j < n; ++j) {
                           pb.grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
                         }
                       }
                     }
                   });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: needs rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const int m = trans_a ? a.dim(1) : a.dim(0);
  const int ka = trans_a ? a.dim(0) : a.dim(1);
  const int kb = trans_b ? b.dim(1) : b.dim(0);
  const int n = trans_b ? b.dim(0) : b.dim(1);
  if (ka != kb) {
    throw DimensionError(std::string("matmul: inner dimensions disagree, ") +
                         (trans_a ? "a^T " : "a ") + shape_str(a.shape()) + " x " +
                         (trans_b ? "b^T " : "b ") + shape_str(b.shape()));
  }
  std::vector<float> out(static_cast<std::size_t>(m) * n);
  {
    CMapMat A(a.data().data(), a.dim(0), a.dim(1));
    CMapMat B(b.data().data(), b.dim(0), b.dim(1));
    MapMat C(out.data(), m, n);
    if (!trans_a && !trans_b) {
      C.noalias() = A * B;
    } else if (trans_a && !trans_b) {
      C.noalias() = A.transpose() * B;
    } else if (!trans_a && trans_b) {
      C.noalias() = A * B.transpose();
    } else {
      C.noalias() = A.transpose() * B.transpose();
    }
  }
  return make_node(
      {m, n}, std::move(out), "matmul", {a.impl(), b.impl()},
      [m, n, trans_a, trans_b](TensorImpl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        CMapMat G(self.grad.data(), m, n);
        CMapMat A(pa.data.data(), pa.shape[0], pa.shape[1]);
        CMapMat B(pb.data.data(), pb.shape[0], pb.shape[1]);
        if (pa.requires_grad) {
          MapMat dA(pa.grad.data(), pa.shape[0], pa.shape[1]);
          if (!trans_a && !trans_b) {
            dA.noalias() += G * B.transpose();
          } else if (trans_a && !trans_b) {
            dA.noalias() += B * G.transpose();
          } else if (!trans_a && trans_b) {
            dA.noalias() += G * B;
          } else {
            dA.noalias() += B.transpose() * G.transpose();
          }
        }
        if (pb.requires_grad) {
          MapMat dB(pb.grad.data(), pb.shape[0], pb.shape[1]);
          if (!trans_a && !trans_b) {
            dB.noalias() += A.transpose() * G;
          } else if (trans_a && !trans_b) {
            dB.noalias() += A * G;
          } else if (!trans_a && trans_b) {
            dB.noalias() += G.transpose() * A;
          } else {
            dB.noalias() += G.transpose() * A.transpose();
          }
        }
      });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& rows) {
  if (table.rank() != 2) {
    throw DimensionError("gather_rows: table must be rank-2, got " + shape_str(table.shape()));
  }
  const int r = table.dim(0), d = table.dim(1);
  for (int idx : rows) {
    if (idx < 0 || idx >= r) {
      throw IndexError("gather_rows: row " + std::to_string(idx) + " outside [0," +
                       std::to_string(r) + ")");
    }
  }
  const int n = static_cast<int>(rows.size());
  std::vector<float> out(static_cast<std::size_t>(n) * d);
  const auto& td = table.data();
  for (int i = 0; i < n; ++i) {
    const float* src = td.data() + static_cast<std::size_t>(rows[i]) * d;
    std::copy(src, src + d, out.data() + static_cast<std::size_t>(i) * d);
  }
  return make_node({n, d}, std::move(out), "gather_rows", {table.impl()},
                   [rows, d](TensorImpl& self) {
                     auto& pt = *self.parents[0];
                     for (std::size_t i = 0; i < rows.size(); ++i) {
                       float* dst = pt.grad.data() + static_cast<std::size_t>(rows[i]) * d;
                       const float* g = self.grad.data() + i * d;
                       for (int j = 0; j < d; ++j) dst[j] += g[j];
                     }
                   });
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  if (x.rank() != 2) {
    throw DimensionError("slice_cols: needs rank-2 input, got " + shape_str(x.shape()));
  }
  const int m = x.dim(0), n = x.dim(1);
  if (start < 0 || len < 1 || start + len > n) {
    throw DimensionError("slice_cols: window [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") outside " + shape_str(x.shape()));
  }
  std::vector<float> out(static_cast<std::size_t>(m) * len);
  const auto& xd = x.data();
  for (int i = 0; i < m; ++i) {
    const float* src = xd.data() + static_cast<std::size_t>(i) * n + start;
    std::copy(src, src + len, out.data() + static_cast<std::size_t>(i) * len);
  }
  return make_node({m, len}, std::move(out), "slice_cols", {x.impl()},
                   [m, n, start, len](TensorImpl& self) {
                     auto& px = *self.parents[0];
                     for (int i = 0; i < m; ++i) {
                       float* dst = px.grad.data() + static_cast<std::size_t>(i) * n + start;
                       const float* g = self.grad.data() + static_cast<std::size_t>(i) * len;
                       for (int j = 0; j < len; ++j) dst[j] += g[j];
                     }
                   });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty part list");
  const int m = parts[0].dim(0);
  int total = 0;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::vector<int> widths;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != m) {
      throw DimensionError("concat_cols: part " + shape_str(p.shape()) +
                           " incompatible with row count " + std::to_string(m));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
    parents.push_back(p.impl());
  }
  std::vector<float> out(static_cast<std::size_t>(m) * total);
  int off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pd = parts[k].data();
    const int w = widths[k];
    for (int i = 0; i < m; ++i) {
      std::copy(pd.data() + static_cast<std::size_t>(i) * w,
                pd.data() + static_cast<std::size_t>(i) * w + w,
                out.data() + static_cast<std::size_t>(i) * total + off);
    }
    off += w;
  }
  return make_node({m, total}, std::move(out), "concat_cols", std::move(parents),
                   [m, total, widths](TensorImpl& self) {
                     int off2 = 0;
                     for (std::size_t k = 0; k < self.parents.size(); ++k) {
                       auto& p = *self.parents[k];
                       const int w = widths[k];
                       if (p.requires_grad) {
                         for (int i = 0; i < m; ++i) {
                           const float* g =
                               self.grad.data() + static_cast<std::size_t>(i) * total + off2;
                           float* dst = p.grad.data() + static_cast<std::size_t>(i) * w;
                           for (int j = 0; j < w; ++j) dst[j] += g[j];
                         }
                       }
                       off2 += w;
                     }
                   });
}

Tensor gather_flat(const Tensor& x, std::vector<std::int64_t> idx, std::vector<int> out_shape) {
  const std::size_t n = numel_of(out_shape);
  if (idx.size() != n) {
    throw DimensionError("gather_flat: " + std::to_string(idx.size()) + " indices for shape " +
                         shape_str(out_shape));
  }
  const auto limit = static_cast<std::int64_t>(x.numel());
  for (std::int64_t i : idx) {
    if (i >= limit) {
      throw IndexError("gather_flat: index " + std::to_string(i) + " outside source of " +
                       std::to_string(limit) + " elements");
    }
  }
  std::vector<float> out(n);
  const auto& xd = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = idx[i] >= 0 ? xd[static_cast<std::size_t>(idx[i])] : 0.0f;
  }
  return make_node(std::move(out_shape), std::move(out), "gather_flat", {x.impl()},
                   [idx = std::move(idx)](TensorImpl& self) {
                     auto& px = *self.parents[0];
                     for (std::size_t i = 0; i < idx.size(); ++i) {
                       if (idx[i] >= 0) {
                         px.grad[static_cast<std::size_t>(idx[i])] += self.grad[i];
                       }
                     }
                   });
}

Tensor softmax_with_temperature(const Tensor& logits, float tau) {
  if (!(tau > 0.0f) || !std::isfinite(tau)) {
    throw InvalidParameterError("softmax temperature must be positive and finite, got " +
                                std::to_string(tau));
  }
  const auto [rows, cols] = rows_cols_last(logits, "softmax_with_temperature");
  std::vector<float> out(logits.numel());
  const auto& xd = logits.data();
  for (int r = 0; r < rows; ++r) {
    const float* z = xd.data() + static_cast<std::size_t>(r) * cols;
    float* y = out.data() + static_cast<std::size_t>(r) * cols;
    float m = z[0];
    for (int j = 1; j < cols; ++j) m = std::max(m, z[j]);
    double denom = 0.0;
    for (int j = 0; j < cols; ++j) {
      const float e = std::exp((z[j] - m) / tau);
      y[j] = e;
      denom += e;
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (int j = 0; j < cols; ++j) y[j] *= inv;
  }
  return make_node(logits.shape(), std::move(out), "softmax", {logits.impl()},
                   [rows, cols, tau](TensorImpl& self) {
                     auto& px = *self.parents[0];
                     for (int r = 0; r < rows; ++r) {
                       const float* y = self.data.data() + static_cast<std::size_t>(r) * cols;
                       const float* g = self.grad.data() + static_cast<std::size_t>(r) * cols;
                       float* dx = px.grad.data() + static_cast<std::size_t>(r) * cols;
                       double dot = 0.0;
                       for (int j = 0; j < cols; ++j) dot += static_cast<double>(g[j]) * y[j];
                       for (int j = 0; j < cols; ++j) {
                         dx[j] += y[j] * (g[j] - static_cast<float>(dot)) / tau;
                       }
                     }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const auto [rows, cols] = rows_cols_last(x, "layer_norm");
  if (gain.rank() != 1 || gain.dim(0) != cols || bias.rank() != 1 || bias.dim(0) != cols) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " incompatible with x " +
                         shape_str(x.shape()));
  }
  constexpr float kEps = 1e-5f;
  std::vector<float> out(x.numel());
  std::vector<float> means(static_cast<std::size_t>(rows));
  std::vector<float> inv_stds(static_cast<std::size_t>(rows));
  const auto& xd = x.data();
  const auto& gd = gain.data();
  const auto& bd = bias.data();
  for (int r = 0; r < rows; ++r) {
    const float* row = xd.data() + static_cast<std::size_t>(r) * cols;
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += row[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= cols;
    const float inv = static_cast<float>(1.0 / std::sqrt(var + kEps));
    means[static_cast<std::size_t>(r)] = static_cast<float>(mean);
    inv_stds[static_cast<std::size_t>(r)] = inv;
    float* y = out.data() + static_cast<std::size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) {
      y[j] = (row[j] - static_cast<float>(mean)) * inv * gd[j] + bd[j];
    }
  }
  return make_node(
      x.shape(), std::move(out), "layer_norm", {x.impl(), gain.impl(), bias.impl()},
      [rows, cols, means = std::move(means), inv_stds = std::move(inv_stds)](TensorImpl& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        for (int r = 0; r < rows; ++r) {
          const std::size_t base = static_cast<std::size_t>(r) * cols;
          const float* xrow = px.data.data() + base;
          const float* g = self.grad.data() + base;
          const float mean = means[static_cast<std::size_t>(r)];
          const float inv = inv_stds[static_cast<std::size_t>(r)];
          double ghat_mean = 0.0, ghat_xhat_mean = 0.0;
          for (int j = 0; j < cols; ++j) {
            const float xhat = (xrow[j] - mean) * inv;
            const float ghat = g[j] * pg.data[j];
            ghat_mean += ghat;
            ghat_xhat_mean += static_cast<double>(ghat) * xhat;
            if (pg.requires_grad) pg.grad[j] += g[j] * xhat;
            if (pb.requires_grad) pb.grad[j] += g[j];
          }
          ghat_mean /= cols;
          ghat_xhat_mean /= cols;
          if (px.requires_grad) {
            float* dx = px.grad.data() + base;
            for (int j = 0; j < cols; ++j) {
              const float xhat = (xrow[j] - mean) * inv;
              const float ghat = g[j] * pg.data[j];
              dx[j] += inv * (ghat - static_cast<float>(ghat_mean) -
                              xhat * static_cast<float>(ghat_xhat_mean));
            }
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  // Elementwise math in double: the tanh chain loses enough precision in
  // float to disturb finite-difference comparisons, and this op is never
  // the bottleneck next to the matrix products.
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  constexpr double kCubic = 0.044715;
  std::vector<float> out(x.numel());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xd[i];
    const double u = kSqrt2OverPi * (v + kCubic * v * v * v);
    out[i] = static_cast<float>(0.5 * v * (1.0 + std::tanh(u)));
  }
  return make_node(x.shape(), std::move(out), "gelu", {x.impl()}, [](TensorImpl& self) {
    constexpr double c = 0.7978845608028654;
    constexpr double a = 0.044715;
    auto& px = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = px.data[i];
      const double u = c * (v + a * v * v * v);
      const double t = std::tanh(u);
      const double sech2 = 1.0 - t * t;
      const double dy = 0.5 * (1.0 + t) + 0.5 * v * sech2 * c * (1.0 + 3.0 * a * v * v);
      px.grad[i] += self.grad[i] * static_cast<float>(dy);
    }
  });
}

Tensor cross_entropy_label_smoothed(const Tensor& logits, const std::vector<int>& targets,
                                    float epsilon) {
  if (logits.rank() != 2) {
    throw DimensionError("cross_entropy: logits must be [B,K], got " + shape_str(logits.shape()));
  }
  if (epsilon < 0.0f || epsilon >= 1.0f) {
    throw InvalidParameterError("label smoothing must lie in [0,1), got " +
                                std::to_string(epsilon));
  }
  const int b = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(targets.size()) != b) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(b) + " rows");
  }
  for (int t : targets) {
    if (t < 0 || t >= k) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside [0," +
                       std::to_string(k) + ")");
    }
  }
  // probs kept for the backward pass.
  std::vector<float> probs(logits.numel());
  const auto& zd = logits.data();
  double total = 0.0;
  for (int r = 0; r < b; ++r) {
    const float* z = zd.data() + static_cast<std::size_t>(r) * k;
    float* p = probs.data() + static_cast<std::size_t>(r) * k;
    float m = z[0];
    for (int j = 1; j < k; ++j) m = std::max(m, z[j]);
    double denom = 0.0, zsum = 0.0;
    for (int j = 0; j < k; ++j) {
      const double e = std::exp(static_cast<double>(z[j]) - m);
      p[j] = static_cast<float>(e);
      denom += e;
      zsum += z[j];
    }
    const double lse = m + std::log(denom);
    for (int j = 0; j < k; ++j) p[j] = static_cast<float>(p[j] / denom);
    total += lse - (1.0 - epsilon) * z[targets[static_cast<std::size_t>(r)]] -
             (epsilon / k) * zsum;
  }
  std::vector<float> out{static_cast<float>(total / b)};
  Tensor node =
      make_node({}, std::move(out), "cross_entropy", {logits.impl()},
                [b, k, epsilon, targets, probs = std::move(probs)](TensorImpl& self) {
                  auto& pz = *self.parents[0];
                  const float gscale = self.grad[0] / static_cast<float>(b);
                  for (int r = 0; r < b; ++r) {
                    const std::size_t base = static_cast<std::size_t>(r) * k;
                    const int t = targets[static_cast<std::size_t>(r)];
                    for (int j = 0; j < k; ++j) {
                      float q = epsilon / static_cast<float>(k);
                      if (j == t) q += 1.0f - epsilon;
                      pz.grad[base + j] += gscale * (probs[base + j] - q);
                    }
                  }
                });
  node.impl()->scalar_double = total / b;
  return node;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  Tensor node =
      make_node({}, {static_cast<float>(total)}, "sum", {x.impl()}, [](TensorImpl& self) {
        auto& px = *self.parents[0];
        const float g = self.grad[0];
        for (float& d : px.grad) d += g;
      });
  node.impl()->scalar_double = total;
  return node;
}

Tensor mean_squared_error(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mean_squared_error");
  const Tensor d = sub(a, b);
  return scale(sum(mul(d, d)), 1.0f / static_cast<float>(a.numel()));
}

Tensor dropout(const Tensor& x, float p, bool active, Rng& rng) {
  if (p < 0.0f || p >= 1.0f) {
    throw InvalidParameterError("dropout probability must lie in [0,1), got " + std::to_string(p));
  }
  if (!active || p == 0.0f) return x;
  const float keep_scale = 1.0f / (1.0f - p);
  std::vector<float> mask(x.numel());
  for (float& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0f;
  std::vector<float> out(x.numel());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * mask[i];
  return make_node(x.shape(), std::move(out), "dropout", {x.impl()},
                   [mask = std::move(mask)](TensorImpl& self) {
                     auto& px = *self.parents[0];
                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                       px.grad[i] += self.grad[i] * mask[i];
                     }
                   });
}

Tensor detach(const Tensor& x) {
  Tensor node = Tensor::from_data(x.shape(), x.data(), false);
  node.impl()->scalar_double = x.impl()->scalar_double;
  return node;
}

}  // namespace mgm::nn
