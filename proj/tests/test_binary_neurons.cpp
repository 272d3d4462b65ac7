#include <cmath>
#include <vector>

#include "bingan/binary_neurons.hpp"
#include "bingan/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using bingan::BinaryOutputLayer;
using bingan::NeuronMode;
using bingan::Tensor;
using bingan::TensorD;

namespace {
double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

TEST_CASE("deterministic binary neuron thresholds the preactivation") {
  auto [out, rec] = bingan::dbn_forward(TensorD::from({3}, {3.0, -3.0, 0.0}), 1.0);
  CHECK(out.at(0) == 1.0);
  CHECK(out.at(1) == 0.0);
  CHECK(out.at(2) == 1.0);  // u(0) = 1, ties fire
  CHECK(rec.preact.at(0) == doctest::Approx(sigma(3.0)));
  CHECK(rec.preact.at(2) == doctest::Approx(0.5));
}

TEST_CASE("binary outputs are exactly zero or one and DBN is deterministic") {
  bingan::RngStream rng(21);
  std::vector<double> v(256);
  for (auto& x : v) x = rng.uniform(-4, 4);
  TensorD x = TensorD::from({16, 16}, v);
  auto [a, ra] = bingan::dbn_forward(x, 1.3);
  auto [b, rb] = bingan::dbn_forward(x, 1.3);
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    CHECK((a.at(i) == 0.0 || a.at(i) == 1.0));
    CHECK(a.at(i) == b.at(i));
  }
  bingan::RngStream noise(22);
  auto [s, rs] = bingan::sbn_forward(x, 1.3, noise);
  for (std::int64_t i = 0; i < s.numel(); ++i) CHECK((s.at(i) == 0.0 || s.at(i) == 1.0));
}

TEST_CASE("stochastic binary neuron firing rates") {
  SUBCASE("saturated input always fires") {
    bingan::RngStream rng(23);
    TensorD x = TensorD::full({10000}, 20.0);
    auto [out, rec] = bingan::sbn_forward(x, 1.0, rng);
    for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == 1.0);
  }

  SUBCASE("empirical rate tracks the preactivation") {
    const int m = 100000;
    struct Case {
      double x, p;
    };
    for (Case c : {Case{0.0, 0.5}, Case{std::log(0.25 / 0.75), 0.25}}) {
      bingan::RngStream rng(24);
      TensorD x = TensorD::full({m}, c.x);
      auto [out, rec] = bingan::sbn_forward(x, 1.0, rng);
      double rate = 0;
      for (std::int64_t i = 0; i < out.numel(); ++i) rate += out.at(i);
      rate /= m;
      CHECK(std::abs(rate - c.p) < oracles::binomial_3sigma(c.p, m));
    }
  }
}

TEST_CASE("straight-through gradients") {
  auto ste_at = [](double x, double tau) {
    auto [out, rec] = bingan::dbn_forward(TensorD::scalar(x), tau);
    return bingan::ste_backward(TensorD::scalar(1.0), rec, tau).item();
  };

  CHECK(ste_at(0.0, 1.0) == doctest::Approx(0.25));
  CHECK(ste_at(0.0, 1.21) == doctest::Approx(0.3025));
  CHECK(ste_at(20.0, 1.0) < 1e-6);
  CHECK(ste_at(-20.0, 1.0) < 1e-6);

  SUBCASE("matches the analytic sigmoid derivative at random points") {
    bingan::RngStream rng(25);
    for (int i = 0; i < 1000; ++i) {
      double x = rng.uniform(-6, 6);
      double tau = rng.uniform(0.5, 3.0);
      double p = sigma(tau * x);
      CHECK(std::abs(ste_at(x, tau) - tau * p * (1 - p)) < 1e-6);
    }
  }

  SUBCASE("matches finite differences of the preactivation, not the binary output") {
    bingan::RngStream rng(26);
    double tau = 1.7;
    for (int i = 0; i < 50; ++i) {
      double x = rng.uniform(-3, 3);
      double h = 1e-6;
      double numeric = (sigma(tau * (x + h)) - sigma(tau * (x - h))) / (2 * h);
      CHECK(std::abs(ste_at(x, tau) - numeric) < 1e-5);
    }
  }

  SUBCASE("shape mismatch is rejected") {
    auto [out, rec] = bingan::dbn_forward(TensorD::zeros({4}), 1.0);
    CHECK_THROWS_AS(bingan::ste_backward(TensorD::zeros({5}), rec, 1.0), bingan::TensorError);
  }
}

TEST_CASE("binary node backpropagates the straight-through estimate") {
  TensorD x = TensorD::from({2}, {0.0, 1.0});
  x.set_requires_grad(true);
  BinaryOutputLayer<double> layer(NeuronMode::kDeterministic, bingan::RngStream(3));
  layer.set_tau(2.0);
  TensorD out = layer.forward(x);
  bingan::backward(bingan::sum_all(out));
  for (int i = 0; i < 2; ++i) {
    double p = sigma(2.0 * x.at(i));
    CHECK(x.grad().at(i) == doctest::Approx(2.0 * p * (1 - p)));
  }

  // first-order only: a create_graph pass through the binarization fails
  TensorD y = layer.forward(x);
  CHECK_THROWS_AS(bingan::grad_wrt(bingan::sum_all(y), x, true), bingan::TensorError);
}

TEST_CASE("slope annealing") {
  BinaryOutputLayer<double> layer(NeuronMode::kDeterministic, bingan::RngStream(4));
  CHECK(layer.tau() == 1.0);
  layer.anneal_slope();
  CHECK(layer.tau() == doctest::Approx(1.1));
  double want = 1.1;
  for (int k = 2; k <= 30; ++k) {
    layer.anneal_slope();
    want *= 1.1;
    CHECK(layer.tau() == want);  // exactly the sequential product
  }

  BinaryOutputLayer<double> frozen(NeuronMode::kStochastic, bingan::RngStream(5),
                                   /*anneal_enabled=*/false);
  frozen.anneal_slope();
  CHECK(frozen.tau() == 1.0);

  CHECK_THROWS_AS(layer.set_tau(0.0), bingan::TensorError);
}

TEST_CASE("DBN equals SBN with the noise forced to one half") {
  double tau = 1.4;
  std::vector<double> grid;
  for (double x = -3.0; x <= 3.0; x += 0.25) grid.push_back(x);
  TensorD x = TensorD::from({static_cast<int>(grid.size())}, grid);
  auto [dbn, r1] = bingan::dbn_forward(x, tau);
  auto [sbn, r2] = bingan::sbn_forward_given(x, tau, std::vector<double>(grid.size(), 0.5));
  for (std::int64_t i = 0; i < dbn.numel(); ++i) CHECK(dbn.at(i) == sbn.at(i));
}

TEST_CASE("real-valued mode emits probabilities strictly inside (0,1)") {
  bingan::RngStream rng(27);
  std::vector<double> v(64);
  for (auto& e : v) e = rng.uniform(-5, 5);
  TensorD x = TensorD::from({8, 8}, v);
  x.set_requires_grad(true);
  BinaryOutputLayer<double> layer(NeuronMode::kRealValued, bingan::RngStream(6));
  TensorD out = layer.forward(x);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out.at(i) > 0.0);
    CHECK(out.at(i) < 1.0);
  }
  // differentiable like any sigmoid, second-order pass included
  TensorD g = bingan::grad_wrt(bingan::sum_all(out), x, true);
  CHECK(g.numel() == 64);
}
