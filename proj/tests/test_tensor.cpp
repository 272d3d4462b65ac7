#include <cmath>
#include <limits>
#include <vector>

#include "bingan/rng.hpp"
#include "bingan/tensor.hpp"
#include "doctest.h"
#include "oracles.hpp"

using bingan::Tensor;
using bingan::TensorD;
using bingan::TensorError;

namespace {

TensorD random_leaf(bingan::Shape shape, bingan::RngStream& rng, double lo = -1.0, double hi = 1.0,
                    bool needs_grad = true) {
  std::vector<double> v(static_cast<std::size_t>(bingan::shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  TensorD t = TensorD::from(std::move(shape), std::move(v));
  t.set_requires_grad(needs_grad);
  return t;
}

// Compares analytic leaf gradients of a re-evaluable scalar expression
// against central finite differences.
template <typename MakeLoss>
void expect_gradients_match(std::vector<TensorD> leaves, MakeLoss make_loss, double tol = 1e-4) {
  TensorD loss = make_loss();
  for (auto& l : leaves) l.zero_grad();
  bingan::backward(loss);
  for (auto& leaf : leaves) {
    auto numeric = oracles::numeric_gradient(leaf, [&] {
      bingan::NoGradGuard off;
      return make_loss().item();
    });
    REQUIRE(leaf.has_grad());
    TensorD g = leaf.grad();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      CAPTURE(i);
      CHECK(oracles::rel_error(g.at(i), numeric[static_cast<std::size_t>(i)]) < tol);
    }
  }
}

}  // namespace

TEST_CASE("eager op recording computes expected values") {
  TensorD a = TensorD::scalar(2.0), b = TensorD::scalar(3.0);
  CHECK(bingan::add(a, b).item() == doctest::Approx(5.0));

  TensorD m1 = TensorD::zeros({2, 3}), m2 = TensorD::zeros({3, 4});
  TensorD prod = bingan::matmul(m1, m2);
  CHECK(prod.shape() == bingan::Shape{2, 4});

  CHECK(bingan::sigmoid(TensorD::scalar(0.0)).item() == doctest::Approx(0.5));
}

TEST_CASE("shape mismatches fail naming the op and both shapes") {
  TensorD a = TensorD::zeros({2, 3}), b = TensorD::zeros({2, 4});
  CHECK_THROWS_WITH_AS(bingan::add(a, b), doctest::Contains("add"), TensorError);
  try {
    bingan::matmul(a, TensorD::zeros({5, 2}));
    FAIL("expected throw");
  } catch (const TensorError& e) {
    std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[5x2]") != std::string::npos);
  }
}

TEST_CASE("backward through x^2") {
  TensorD x = TensorD::scalar(3.0);
  x.set_requires_grad(true);
  TensorD loss = bingan::mul(x, x);
  bingan::backward(loss);
  CHECK(x.grad().item() == doctest::Approx(6.0));
}

TEST_CASE("backward of mean(sigmoid(Wx)) matches finite differences") {
  bingan::RngStream rng(11);
  TensorD w = random_leaf({4, 3}, rng, -0.3, 0.3);
  TensorD x = random_leaf({2, 4}, rng, -1.0, 1.0);
  expect_gradients_match({w, x}, [&] {
    return bingan::mean_all(bingan::sigmoid(bingan::matmul(x, w)));
  });
}

TEST_CASE("gradient of an unused leaf is not materialized") {
  TensorD x = TensorD::scalar(1.5);
  x.set_requires_grad(true);
  TensorD y = TensorD::scalar(2.0);
  y.set_requires_grad(true);
  bingan::backward(bingan::mul(y, y));
  CHECK_FALSE(x.has_grad());
  CHECK(bingan::grad_wrt(bingan::mul(y, y), x, false).at(0) == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
  TensorD x = TensorD::zeros({3});
  x.set_requires_grad(true);
  CHECK_THROWS_AS(bingan::backward(bingan::affine(x, 2.0, 0.0)), TensorError);
}

TEST_CASE("NaN gradient aborts naming the node") {
  TensorD x = TensorD::scalar(1.0);
  x.set_requires_grad(true);
  TensorD y = bingan::custom_unary<double>(
      "poison", x, {1.0},
      [](const std::vector<double>& up) {
        return std::vector<double>{up[0] * std::numeric_limits<double>::quiet_NaN()};
      });
  CHECK_THROWS_WITH_AS(bingan::backward(bingan::sum_all(y)), doctest::Contains("NaN"),
                       TensorError);
}

TEST_CASE("finite-difference property over every primitive") {
  bingan::RngStream rng(202);

  SUBCASE("elementwise and reductions") {
    TensorD a = random_leaf({3, 5}, rng), b = random_leaf({3, 5}, rng);
    expect_gradients_match({a, b}, [&] { return bingan::sum_all(bingan::mul(bingan::add(a, b), b)); });
    expect_gradients_match({a}, [&] { return bingan::mean_all(bingan::affine(a, 2.5, -1.0)); });
    expect_gradients_match({a}, [&] { return bingan::sum_all(bingan::sigmoid(a)); });
    expect_gradients_match({a}, [&] { return bingan::sum_all(bingan::square(a)); });
    expect_gradients_match({a}, [&] { return bingan::mean_all(bingan::mul(a, bingan::sum_rows(a).numel() == 3 ? bingan::broadcast_rows(bingan::sum_rows(a), a.shape()) : a)); });
  }

  SUBCASE("log and pow on positive inputs") {
    TensorD p = random_leaf({4, 4}, rng, 0.2, 2.0);
    expect_gradients_match({p}, [&] { return bingan::sum_all(bingan::log_e(p)); });
    expect_gradients_match({p}, [&] { return bingan::sum_all(bingan::pow_scalar(p, 0.5)); });
    expect_gradients_match({p}, [&] { return bingan::sum_all(bingan::pow_scalar(p, 3.0)); });
    expect_gradients_match({p}, [&] { return bingan::sum_all(bingan::div(TensorD::full({4, 4}, 1.0), p)); });
  }

  SUBCASE("relu family away from the kink") {
    TensorD a = random_leaf({6, 6}, rng);
    for (std::int64_t i = 0; i < a.numel(); ++i)
      if (std::abs(a.at(i)) < 0.05) a.mutable_data()[i] = 0.1;
    expect_gradients_match({a}, [&] { return bingan::sum_all(bingan::relu(a)); });
    expect_gradients_match({a}, [&] { return bingan::sum_all(bingan::leaky_relu(a, 0.2)); });
  }

  SUBCASE("matmul, transpose, bias") {
    TensorD a = random_leaf({3, 4}, rng), w = random_leaf({4, 2}, rng), bias = random_leaf({2}, rng);
    expect_gradients_match({a, w, bias}, [&] {
      return bingan::mean_all(bingan::add_bias(bingan::matmul(a, w), bias));
    });
    expect_gradients_match({a}, [&] { return bingan::sum_all(bingan::transpose(a)); });
  }

  SUBCASE("feature and channel broadcast pairs") {
    TensorD x = random_leaf({3, 2, 2, 2}, rng), cb = random_leaf({2}, rng);
    expect_gradients_match({x, cb}, [&] {
      return bingan::sum_all(bingan::mul(bingan::add_channel_bias(x, cb),
                                         bingan::broadcast_channel(cb, x.shape())));
    });
    expect_gradients_match({x}, [&] { return bingan::sum_all(bingan::sum_to_channel(x)); });
    TensorD f = random_leaf({5}, rng);
    expect_gradients_match({f}, [&] {
      return bingan::mean_all(bingan::broadcast_feature(f, 3));
    });
    TensorD y = random_leaf({4, 5}, rng);
    expect_gradients_match({y}, [&] { return bingan::sum_all(bingan::sum_to_feature(y)); });
  }

  SUBCASE("structural ops") {
    TensorD a = random_leaf({2, 3}, rng), b = random_leaf({2, 2}, rng);
    expect_gradients_match({a, b}, [&] {
      TensorD c = bingan::concat(a, b, 1);
      return bingan::sum_all(bingan::square(bingan::slice(c, 1, 1, 3)));
    });
    expect_gradients_match({a}, [&] {
      return bingan::sum_all(bingan::square(bingan::reshape(a, {3, 2})));
    });
    expect_gradients_match({a}, [&] {
      return bingan::sum_all(bingan::square(bingan::pad_axis(a, 0, 1, 2)));
    });
  }

  SUBCASE("conv family") {
    TensorD x = random_leaf({2, 2, 5, 5}, rng), k = random_leaf({3, 2, 3, 3}, rng);
    auto geo_valid = bingan::conv_geometry(5, 5, 3, 3, 2, 2, bingan::PadMode::kValid);
    expect_gradients_match({x, k}, [&] {
      return bingan::sum_all(bingan::square(bingan::conv2d(x, k, geo_valid)));
    });
    auto geo_same = bingan::conv_geometry(5, 5, 3, 3, 1, 1, bingan::PadMode::kSame);
    expect_gradients_match({x, k}, [&] {
      return bingan::sum_all(bingan::square(bingan::conv2d(x, k, geo_same)));
    });
    TensorD tk = random_leaf({3, 2, 3, 3}, rng);
    expect_gradients_match({x, tk}, [&] {
      return bingan::sum_all(bingan::square(bingan::transconv2d(x, tk, 2, 2)));
    });
  }

  SUBCASE("maxpool with distinct values") {
    std::vector<double> v(2 * 1 * 4 * 4);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 7919) % 97) / 10.0;
    TensorD x = TensorD::from({2, 1, 4, 4}, std::move(v));
    x.set_requires_grad(true);
    expect_gradients_match({x}, [&] {
      return bingan::sum_all(bingan::square(bingan::maxpool2d(x, 2, 2, 2, 2)));
    });
  }

  SUBCASE("per-sample L2 norm") {
    TensorD x = random_leaf({4, 6}, rng, 0.5, 1.5);
    expect_gradients_match({x}, [&] { return bingan::sum_all(bingan::l2_norm_rows(x)); });
  }
}

TEST_CASE("norm and pow bottom out at zero instead of NaN") {
  TensorD x = TensorD::zeros({2, 3});
  x.set_requires_grad(true);
  TensorD n = bingan::l2_norm_rows(x);
  CHECK(n.at(0) == 0.0);
  bingan::backward(bingan::sum_all(n));
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(x.grad().at(i) == 0.0);
}

TEST_CASE("double backward: linear function") {
  TensorD w = TensorD::scalar(1.7), x = TensorD::scalar(0.4);
  w.set_requires_grad(true);
  x.set_requires_grad(true);
  TensorD scalar = bingan::mul(w, x);
  TensorD g = bingan::grad_wrt(scalar, x, /*create_graph=*/true);
  CHECK(g.item() == doctest::Approx(1.7));
  bingan::backward(bingan::square(g));
  CHECK(w.grad().item() == doctest::Approx(2.0 * 1.7));
}

TEST_CASE("double backward: sigmoid second derivative vanishes at zero") {
  TensorD x = TensorD::scalar(0.0);
  x.set_requires_grad(true);
  TensorD first = bingan::grad_wrt(bingan::sigmoid(x), x, true);
  CHECK(first.item() == doctest::Approx(0.25));
  TensorD second = bingan::grad_wrt(first, x, false);
  CHECK(second.item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("double-backward property: gradient of the gradient norm") {
  bingan::RngStream rng(77);
  TensorD w1 = random_leaf({5, 4}, rng, -0.5, 0.5);
  TensorD b1 = random_leaf({4}, rng, -0.2, 0.2);
  TensorD w2 = random_leaf({4, 1}, rng, -0.5, 0.5);
  TensorD xin = random_leaf({3, 5}, rng, -1.0, 1.0, /*requires=*/false);

  auto grad_norm = [&](bool create) {
    TensorD x = xin.clone_leaf(true);
    TensorD h = bingan::leaky_relu(bingan::add_bias(bingan::matmul(x, w1), b1), 0.2);
    TensorD out = bingan::sigmoid(bingan::matmul(h, w2));
    TensorD g = bingan::grad_wrt(bingan::sum_all(out), x, create);
    return bingan::mean_all(bingan::l2_norm_rows(g));
  };

  TensorD loss = grad_norm(true);
  for (auto& t : {w1, b1, w2}) const_cast<TensorD&>(t).zero_grad();
  bingan::backward(loss);
  for (TensorD leaf : {w1, b1, w2}) {
    auto numeric = oracles::numeric_gradient(leaf, [&] { return grad_norm(true).item(); }, 1e-5);
    REQUIRE(leaf.has_grad());
    for (std::int64_t i = 0; i < leaf.numel(); ++i)
      CHECK(oracles::rel_error(leaf.grad().at(i), numeric[static_cast<std::size_t>(i)]) < 1e-3);
  }
}

TEST_CASE("second-order pass through a first-order-only op is an error") {
  TensorD x = TensorD::scalar(1.0);
  x.set_requires_grad(true);
  TensorD y = bingan::custom_unary<double>("hard_step", x, {1.0},
                                           [](const std::vector<double>& up) { return up; });
  CHECK_THROWS_WITH_AS(bingan::grad_wrt(bingan::sum_all(y), x, true),
                       doctest::Contains("hard_step"), TensorError);
}

TEST_CASE("backward is linear in the loss") {
  bingan::RngStream rng(5);
  TensorD x = random_leaf({4, 3}, rng);
  auto grads_for = [&](double a, double b) {
    x.zero_grad();
    TensorD l1 = bingan::sum_all(bingan::square(x));
    TensorD l2 = bingan::mean_all(bingan::sigmoid(x));
    bingan::backward(bingan::add(bingan::affine(l1, a, 0.0), bingan::affine(l2, b, 0.0)));
    return x.grad().vec();
  };
  auto g1 = grads_for(1.0, 0.0);
  auto g2 = grads_for(0.0, 1.0);
  auto mix = grads_for(2.5, -1.5);
  for (std::size_t i = 0; i < mix.size(); ++i)
    CHECK(std::abs(mix[i] - (2.5 * g1[i] - 1.5 * g2[i])) < 1e-6);
}

TEST_CASE("repeated gradient accumulation adds up") {
  TensorD x = TensorD::scalar(2.0);
  x.set_requires_grad(true);
  bingan::backward(bingan::square(x));
  bingan::backward(bingan::square(x));
  CHECK(x.grad().item() == doctest::Approx(8.0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("forward and backward are bit-deterministic") {
  auto run = [] {
    bingan::RngStream rng(99);
    TensorD w = random_leaf({16, 8}, rng);
    TensorD x = random_leaf({4, 16}, rng);
    TensorD loss = bingan::mean_all(bingan::sigmoid(bingan::matmul(x, w)));
    bingan::backward(loss);
    std::vector<double> out = loss.vec();
    auto g = w.grad().vec();
    out.insert(out.end(), g.begin(), g.end());
    return out;
  };
  auto a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("tape is topologically ordered and visits each node once") {
  TensorD x = TensorD::scalar(1.0);
  x.set_requires_grad(true);
  TensorD y = bingan::sigmoid(x);
  TensorD z = bingan::add(bingan::square(y), y);  // diamond: y feeds two consumers
  auto tape = bingan::build_tape(z);
  for (std::size_t i = 0; i + 1 < tape.nodes.size(); ++i)
    CHECK(tape.nodes[i]->seq > tape.nodes[i + 1]->seq);
  for (auto* n : tape.nodes)
    for (const auto& p : n->parents)
      if (p.node()->requires_grad) CHECK(p.node()->seq < n->seq);
  std::unordered_set<const void*> unique(tape.nodes.begin(), tape.nodes.end());
  CHECK(unique.size() == tape.nodes.size());
  // diamond gradient: d/dx (sigma^2 + sigma) = (2 sigma + 1) sigma'
  bingan::backward(z);
  double s = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(x.grad().item() == doctest::Approx((2 * s + 1) * s * (1 - s)));
}

TEST_CASE("maxpool ties route gradient to the first index in row-major order") {
  TensorD x = TensorD::full({1, 1, 2, 2}, 1.0);
  x.set_requires_grad(true);
  TensorD y = bingan::maxpool2d(x, 2, 2, 2, 2);
  bingan::backward(bingan::sum_all(y));
  CHECK(x.grad().at(0) == 1.0);
  CHECK(x.grad().at(1) == 0.0);
  CHECK(x.grad().at(2) == 0.0);
  CHECK(x.grad().at(3) == 0.0);
}
