#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "mgm/adamw.hpp"
#include "mgm/error.hpp"
#include "mgm/fdcheck.hpp"
#include "mgm/ops.hpp"
#include "mgm/rng.hpp"
#include "mgm/tensor.hpp"

using namespace mgm;
using namespace mgm::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false,
                     float stddev = 1.0f) {
  return Tensor::randn(std::move(shape), stddev, rng, requires_grad);
}

Tensor uniform_tensor(std::vector<int> shape, Rng& rng, float lo, float hi,
                      bool requires_grad = false) {
  std::vector<float> d(numel_of(shape));
  for (float& v : d) v = lo + (hi - lo) * static_cast<float>(rng.uniform());
  return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

// Weighted-sum readout so row-stochastic outputs still have nonzero grads.
Tensor weighted_sum(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  const Tensor i2 = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  const Tensor c = matmul(i2, i2);
  CHECK(c.data() == std::vector<float>{1, 0, 0, 1});

  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from_data({2, 1}, {0, 1});
  const Tensor ab = matmul(a, b);
  CHECK(ab.shape() == std::vector<int>{2, 1});
  CHECK(ab.data() == std::vector<float>{2, 4});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({4, 5});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match finite differences for all transpose combos") {
  // Positive inputs keep every reference slope bounded away from the float32
  // noise floor; matmul is linear, so the formulas are fully exercised.
  Rng rng(11);
  for (const bool ta : {false, true}) {
    for (const bool tb : {false, true}) {
      Tensor a = uniform_tensor(ta ? std::vector<int>{7, 5} : std::vector<int>{5, 7}, rng, 0.5f,
                                1.0f, true);
      Tensor b = uniform_tensor(tb ? std::vector<int>{3, 7} : std::vector<int>{7, 3}, rng, 0.5f,
                                1.0f, true);
      const Tensor w = uniform_tensor({5, 3}, rng, 0.5f, 1.0f);
      auto make_loss = [&] { return weighted_sum(matmul(a, b, ta, tb), w); };
      const FdReport report = finite_difference_check(make_loss, {a, b});
      CAPTURE(ta);
      CAPTURE(tb);
      CHECK(report.within(1e-3f, 1e-5f));
    }
  }
}

TEST_CASE("softmax trivial cases") {
  const Tensor flat = softmax_with_temperature(Tensor::from_data({3}, {0, 0, 0}), 1.0f);
  for (float v : flat.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  const Tensor hot = softmax_with_temperature(Tensor::from_data({2}, {10, 0}), 1e6f);
  CHECK(hot.data()[0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(hot.data()[1] == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("softmax direct evaluation oracle") {
  // exp(1,2,3)/sum in double:
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  const double z = e1 + e2 + e3;
  const Tensor y = softmax_with_temperature(Tensor::from_data({3}, {1, 2, 3}), 1.0f);
  CHECK(y.data()[0] == doctest::Approx(e1 / z).epsilon(1e-4));
  CHECK(y.data()[1] == doctest::Approx(e2 / z).epsilon(1e-4));
  CHECK(y.data()[2] == doctest::Approx(e3 / z).epsilon(1e-4));
  // frozen values of that oracle
  CHECK(y.data()[0] == doctest::Approx(0.0900306).epsilon(1e-3));
  CHECK(y.data()[1] == doctest::Approx(0.2447285).epsilon(1e-3));
  CHECK(y.data()[2] == doctest::Approx(0.6652410).epsilon(1e-3));
}

TEST_CASE("softmax rejects non-positive temperature") {
  CHECK_THROWS_AS(softmax_with_temperature(Tensor::from_data({2}, {1, 2}), 0.0f),
                  InvalidParameterError);
  CHECK_THROWS_AS(softmax_with_temperature(Tensor::from_data({2}, {1, 2}), -1.0f),
                  InvalidParameterError);
}

TEST_CASE("softmax rows sum to one and shift invariance") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_tensor({4, 6}, rng, false, 3.0f);
    const Tensor y = softmax_with_temperature(x, 0.7f);
    for (int r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int j = 0; j < 6; ++j) s += y.data()[static_cast<std::size_t>(r) * 6 + j];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    Tensor shifted = Tensor::from_data(x.shape(), x.data());
    for (float& v : shifted.data()) v += 4.25f;
    const Tensor y2 = softmax_with_temperature(shifted, 0.7f);
    for (std::size_t i = 0; i < y.numel(); ++i) {
      CHECK(std::abs(y.data()[i] - y2.data()[i]) < 1e-5f);
    }
  }
}

TEST_CASE("softmax gradient matches finite differences") {
  Rng rng(32);
  Tensor x = random_tensor({4, 5}, rng, true, 0.8f);
  const Tensor w = random_tensor({4, 5}, rng);
  for (const float tau : {1.0f, 2.0f}) {
    auto make_loss = [&] { return weighted_sum(softmax_with_temperature(x, tau), w); };
    const FdReport report = finite_difference_check(make_loss, {x}, {.h = 5e-3f});
    CAPTURE(tau);
    CHECK(report.within(1e-3f, 1e-5f));
  }
}

TEST_CASE("layer_norm trivial rows") {
  const Tensor gain = Tensor::full({4}, 1.0f);
  const Tensor bias = Tensor::zeros({4});
  const Tensor constant = layer_norm(Tensor::full({1, 4}, 2.5f), gain, bias);
  for (float v : constant.data()) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));

  const Tensor gain2 = Tensor::full({2}, 1.0f);
  const Tensor bias2 = Tensor::zeros({2});
  const Tensor y = layer_norm(Tensor::from_data({1, 2}, {1, -1}), gain2, bias2);
  CHECK(y.data()[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(y.data()[1] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm gradient matches finite differences") {
  Rng rng(41);
  Tensor x = random_tensor({4, 8}, rng, true);
  Tensor gain = random_tensor({8}, rng, true, 0.5f);
  Tensor bias = random_tensor({8}, rng, true, 0.5f);
  const Tensor w = random_tensor({4, 8}, rng);
  auto make_loss = [&] { return weighted_sum(layer_norm(x, gain, bias), w); };
  const FdReport report = finite_difference_check(make_loss, {x, gain, bias}, {.h = 1e-2f});
  CHECK(report.within(1e-3f, 1e-5f));
}

TEST_CASE("gelu point values") {
  const Tensor y = gelu(Tensor::from_data({3}, {0.0f, 10.0f, 1.0f}));
  CHECK(y.data()[0] == 0.0f);
  CHECK(y.data()[1] == doctest::Approx(10.0).epsilon(1e-4));
  CHECK(y.data()[2] == doctest::Approx(0.8412).epsilon(2e-3));
}

TEST_CASE("gelu gradient matches finite differences") {
  // Grid avoids the derivative's zero crossing near x = -0.75, where a
  // relative comparison is ill-posed; that point is checked separately
  // against the absolute branch.
  Tensor x = Tensor::from_data({7}, {-3.0f, -2.0f, -1.2f, -0.5f, 0.3f, 1.0f, 2.5f}, true);
  auto make_loss = [&] { return sum(gelu(x)); };
  CHECK(finite_difference_check(make_loss, {x}).within(1e-3f, 1e-5f));

  Tensor crossing = Tensor::from_data({1}, {-0.7518f}, true);
  auto crossing_loss = [&] { return sum(gelu(crossing)); };
  const FdReport at_zero =
      finite_difference_check(crossing_loss, {crossing}, {.h = 1e-3f, .near_zero = 1e-2f});
  CHECK(at_zero.max_abs_err < 1e-5f);
}

TEST_CASE("cross entropy uniform logits give log K") {
  const Tensor logits = Tensor::zeros({2, 4});
  const Tensor loss = cross_entropy_label_smoothed(logits, {1, 3}, 0.1f);
  CHECK(loss.value() == doctest::Approx(std::log(4.0)).epsilon(1e-5));
}

TEST_CASE("cross entropy peaked logits with no smoothing go to zero") {
  const Tensor logits = Tensor::from_data({1, 3}, {-50.0f, 50.0f, -50.0f});
  const Tensor loss = cross_entropy_label_smoothed(logits, {1}, 0.0f);
  CHECK(loss.value() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("cross entropy smoothed oracle value") {
  // direct double evaluation of -sum_k q_k log p_k,
  // q = (1-eps) onehot + eps/K
  const double z[3] = {1.0, 2.0, 3.0};
  const double eps = 0.1;
  const int target = 2;
  double denom = 0.0;
  for (double v : z) denom += std::exp(v);
  double expected = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double q = (k == target ? 1.0 - eps : 0.0) + eps / 3.0;
    expected -= q * std::log(std::exp(z[k]) / denom);
  }
  CHECK(expected == doctest::Approx(0.5076060).epsilon(1e-5));  // frozen oracle value

  const Tensor loss =
      cross_entropy_label_smoothed(Tensor::from_data({1, 3}, {1, 2, 3}), {2}, 0.1f);
  CHECK(loss.value() == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("cross entropy rejects bad targets and smoothing") {
  const Tensor logits = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(cross_entropy_label_smoothed(logits, {0, 3}, 0.1f), IndexError);
  CHECK_THROWS_AS(cross_entropy_label_smoothed(logits, {0, -1}, 0.1f), IndexError);
  CHECK_THROWS_AS(cross_entropy_label_smoothed(logits, {0, 1}, 1.0f), InvalidParameterError);
}

TEST_CASE("cross entropy respects the Gibbs bound") {
  Rng rng(61);
  const int k = 5;
  const float eps = 0.1f;
  const double q_hi = 1.0 - eps + eps / k;
  const double q_lo = eps / k;
  const double smoothed_entropy = -(q_hi * std::log(q_hi) + (k - 1) * q_lo * std::log(q_lo));
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor logits = random_tensor({3, k}, rng, false, 2.0f);
    const Tensor loss = cross_entropy_label_smoothed(
        logits, {static_cast<int>(rng.below(k)), static_cast<int>(rng.below(k)),
                 static_cast<int>(rng.below(k))},
        eps);
    CHECK(loss.value() >= smoothed_entropy - 1e-5);
  }
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Rng rng(71);
  Tensor logits = random_tensor({4, 5}, rng, true);
  auto make_loss = [&] { return cross_entropy_label_smoothed(logits, {0, 4, 2, 2}, 0.1f); };
  CHECK(finite_difference_check(make_loss, {logits}).within(1e-3f, 1e-5f));
}

TEST_CASE("backward basics") {
  Tensor x = Tensor::from_data({3}, {5, -1, 2}, true);
  backward(sum(x));
  CHECK(x.grad() == std::vector<float>{1, 1, 1});

  Tensor y = Tensor::from_data({2}, {1, 2}, true);
  backward(sum(mul(y, y)));
  CHECK(y.grad() == std::vector<float>{2, 4});
}

TEST_CASE("backward accumulates across calls until zero_grad") {
  Tensor x = Tensor::from_data({3}, {0, 0, 0}, true);
  const Tensor loss = sum(x);
  backward(loss);
  backward(loss);
  CHECK(x.grad() == std::vector<float>{2, 2, 2});
  x.zero_grad();
  CHECK(x.grad() == std::vector<float>{0, 0, 0});
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
}

TEST_CASE("two layer MLP gradients match finite differences") {
  Rng rng(82);
  Tensor input = random_tensor({3, 4}, rng, true);
  Tensor w1 = random_tensor({4, 8}, rng, true, 0.5f);
  Tensor b1 = random_tensor({8}, rng, true, 0.1f);
  Tensor w2 = random_tensor({8, 5}, rng, true, 0.5f);
  Tensor b2 = random_tensor({5}, rng, true, 0.1f);
  auto make_loss = [&] {
    const Tensor h = gelu(add_bias_rows(matmul(input, w1), b1));
    const Tensor logits = add_bias_rows(matmul(h, w2), b2);
    return cross_entropy_label_smoothed(logits, {0, 3, 1}, 0.1f);
  };
  const FdReport report = finite_difference_check(make_loss, {input, w1, b1, w2, b2}, {.h = 1e-2f});
  CHECK(report.within(1e-3f, 1e-5f));
}

TEST_CASE("gather slice concat and flat-gather gradients") {
  Rng rng(91);
  Tensor table = random_tensor({6, 4}, rng, true);
  const Tensor w = random_tensor({3, 4}, rng);
  auto gather_loss = [&] {
    return weighted_sum(gather_rows(table, {5, 0, 5}), w);  // repeated row: scatter-add
  };
  CHECK(finite_difference_check(gather_loss, {table}).within(1e-3f, 1e-5f));

  Tensor x = random_tensor({4, 6}, rng, true);
  const Tensor w2 = random_tensor({4, 2}, rng);
  auto slice_loss = [&] { return weighted_sum(slice_cols(x, 3, 2), w2); };
  CHECK(finite_difference_check(slice_loss, {x}).within(1e-3f, 1e-5f));

  Tensor a = random_tensor({3, 2}, rng, true);
  Tensor b = random_tensor({3, 3}, rng, true);
  const Tensor w3 = random_tensor({3, 5}, rng);
  auto concat_loss = [&] { return weighted_sum(concat_cols({a, b}), w3); };
  CHECK(finite_difference_check(concat_loss, {a, b}).within(1e-3f, 1e-5f));

  Tensor src = random_tensor({5}, rng, true);
  const std::vector<std::int64_t> idx{4, -1, 0, 0, 2, -1};
  const Tensor w4 = random_tensor({2, 3}, rng);
  auto flat_loss = [&] { return weighted_sum(gather_flat(src, idx, {2, 3}), w4); };
  CHECK(finite_difference_check(flat_loss, {src}).within(1e-3f, 1e-5f));
  const Tensor padded = gather_flat(src, idx, {2, 3});
  CHECK(padded.data()[1] == 0.0f);  // -1 means zero padding
  CHECK(padded.data()[5] == 0.0f);

  CHECK_THROWS_AS(gather_rows(table, {6}), IndexError);
  CHECK_THROWS_AS(slice_cols(x, 5, 3), DimensionError);
}

TEST_CASE("gather_rows shares storage with repeated backward") {
  Tensor table = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  backward(sum(gather_rows(table, {1, 1})));
  CHECK(table.grad() == std::vector<float>{0, 0, 2, 2});
}

TEST_CASE("adamw zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_data({3}, {1, -2, 3}, true);
  AdamW opt({p}, {.lr = 0.1f, .weight_decay = 0.0f});
  opt.step();
  CHECK(p.data() == std::vector<float>{1, -2, 3});
}

TEST_CASE("adamw lr zero is an exact no-op") {
  Tensor p = Tensor::from_data({2}, {0.5f, -0.75f}, true);
  p.grad() = {1.0f, -2.0f};
  AdamW opt({p}, {.lr = 0.0f, .weight_decay = 0.5f});
  opt.step();
  CHECK(p.data() == std::vector<float>{0.5f, -0.75f});
}

TEST_CASE("adamw first step hand evaluation") {
  // bias-corrected first step with unit gradient: p -= lr * 1/(sqrt(1)+eps)
  Tensor p = Tensor::from_data({1}, {1.0f}, true);
  p.grad() = {1.0f};
  AdamW opt({p}, {.lr = 0.1f, .beta1 = 0.9f, .beta2 = 0.96f, .weight_decay = 0.0f});
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(0.9).epsilon(1e-5));
}

TEST_CASE("adamw converges on a quadratic") {
  Tensor p = Tensor::from_data({1}, {1.0f}, true);
  AdamW opt({p}, {.lr = 0.1f, .beta1 = 0.9f, .beta2 = 0.96f, .weight_decay = 0.0f});
  for (int i = 0; i < 100; ++i) {
    opt.zero_grad();
    backward(sum(mul(p, p)));
    opt.step();
  }
  CHECK(std::abs(p.data()[0]) < 0.05f);
}

TEST_CASE("finite difference checker sanity") {
  Tensor x = Tensor::from_data({3}, {0.3f, -0.7f, 1.1f}, true);
  auto sum_loss = [&] { return sum(x); };
  const FdReport clean = finite_difference_check(sum_loss, {x});
  CHECK(clean.max_rel_err < 1e-4f);
  CHECK(clean.elements_checked == 3);

  // Stale grads from an earlier backward must not leak into the report.
  backward(sum_loss());
  const FdReport after = finite_difference_check(sum_loss, {x});
  CHECK(after.max_rel_err < 1e-4f);
}

TEST_CASE("finite difference checker reports wrong gradients") {
  // Analytic grad 2x the numeric slope should score relative error ~= 1.
  // f = sum(x) + detach(-0.5*sum(x)) evaluates to 0.5*sum(x) but only the
  // undetached branch carries gradient, so analytic = 1 vs numeric = 0.5.
  Tensor x = Tensor::from_data({2}, {0.4f, -0.9f}, true);
  auto make_loss = [&] { return add(sum(x), detach(scale(sum(x), -0.5f))); };
  const FdReport report = finite_difference_check(make_loss, {x});
  CHECK(report.max_rel_err == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("dropout") {
  Rng rng(101);
  const Tensor x = Tensor::full({100}, 1.0f);
  const Tensor off = dropout(x, 0.5f, false, rng);
  CHECK(off.data() == x.data());

  Rng r1(7), r2(7);
  const Tensor a = dropout(x, 0.5f, true, r1);
  const Tensor b = dropout(x, 0.5f, true, r2);
  CHECK(a.data() == b.data());  // seed-deterministic
  int kept = 0;
  for (float v : a.data()) {
    CHECK((v == 0.0f || v == 2.0f));  // inverted dropout scale
    kept += v != 0.0f;
  }
  CHECK(kept > 20);
  CHECK(kept < 80);
  CHECK_THROWS_AS(dropout(x, 1.0f, true, rng), InvalidParameterError);
}

TEST_CASE("ops are deterministic within a process") {
  auto run = [] {
    Rng rng(55);
    const Tensor x = Tensor::randn({6, 6}, 1.0f, rng);
    const Tensor w = Tensor::randn({6, 6}, 0.3f, rng);
    const Tensor y = gelu(matmul(softmax_with_temperature(x, 0.8f), w));
    return y.data();
  };
  CHECK(run() == run());
}

TEST_CASE("ops stay finite on finite inputs") {
  Rng rng(111);
  const Tensor x = random_tensor({8, 8}, rng, false, 10.0f);
  const Tensor gain = Tensor::full({8}, 1.0f);
  const Tensor bias = Tensor::zeros({8});
  for (const Tensor& t : {softmax_with_temperature(x, 0.1f), layer_norm(x, gain, bias), gelu(x),
                          matmul(x, x), mul(x, x)}) {
    for (float v : t.data()) CHECK(std::isfinite(v));
  }
}
