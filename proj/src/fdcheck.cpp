#include "mgm/fdcheck.hpp"

#include <cmath>

#include "mgm/error.hpp"

namespace mgm::nn {

namespace {

// Loss value at the best precision the graph kept for it.
double loss_value(const Tensor& loss) {
  const double side = loss.impl()->scalar_double;
  return std::isnan(side) ? static_cast<double>(loss.value()) : side;
}

}  // namespace

FdReport finite_difference_check(const std::function<Tensor()>& make_loss,
                                 const std::vector<Tensor>& params, FdOptions opt) {
  if (!(opt.h > 0.0f)) throw InvalidParameterError("finite_difference_check: h must be positive");

  for (const Tensor& p : params) {
    const_cast<Tensor&>(p).zero_grad();
  }
  backward(make_loss());

  std::vector<std::vector<float>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) analytic.push_back(p.grad());

  FdReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const float saved = p.data()[j];
      p.data()[j] = saved + opt.h;
      const float hi = p.data()[j];  // realized perturbation after rounding
      const double fplus = loss_value(make_loss());
      p.data()[j] = saved - opt.h;
      const float lo = p.data()[j];
      const double fminus = loss_value(make_loss());
      p.data()[j] = saved;
      const double numeric =
          (fplus - fminus) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double diff = std::abs(static_cast<double>(analytic[pi][j]) - numeric);
      if (std::abs(numeric) >= opt.near_zero) {
        report.max_rel_err =
            std::max(report.max_rel_err, static_cast<float>(diff / std::abs(numeric)));
      } else {
        report.max_abs_err = std::max(report.max_abs_err, static_cast<float>(diff));
      }
      ++report.elements_checked;
    }
  }
  return report;
}

}  // namespace mgm::nn
