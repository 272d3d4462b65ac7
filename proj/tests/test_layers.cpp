#include <cmath>
#include <vector>

#include "bingan/layers.hpp"
#include "bingan/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using bingan::Activation;
using bingan::Init;
using bingan::Mode;
using bingan::Tensor;
using bingan::TensorD;

TEST_CASE("dense forward is xW + b then activation") {
  bingan::RngStream rng(1);
  bingan::DenseLayer<double> layer(2, 2, Activation::kLinear, Init::kHeUniform, rng);
  double* w = layer.weight().mutable_data();
  w[0] = 1;
  w[1] = 0;
  w[2] = 0;
  w[3] = 1;
  TensorD x = TensorD::from({1, 2}, {1.0, 0.0});
  TensorD y = layer.forward(x, Mode::kTrain);
  CHECK(y.at(0) == 1.0);
  CHECK(y.at(1) == 0.0);

  bingan::DenseLayer<double> relu_layer(3, 4, Activation::kRelu, Init::kHeUniform, rng);
  TensorD z = relu_layer.forward(TensorD::zeros({2, 3}), Mode::kTrain);
  for (std::int64_t i = 0; i < z.numel(); ++i) CHECK(z.at(i) == 0.0);

  CHECK_THROWS_AS(layer.forward(TensorD::zeros({1, 3}), Mode::kTrain), bingan::TensorError);
}

TEST_CASE("spatial size arithmetic") {
  // transposed-conv chain of the CNN generator: 1 -> 2 -> 6 -> 13 -> 28
  bingan::RngStream rng(2);
  int sizes[4][3] = {{2, 1, 0}, {4, 2, 0}, {3, 2, 0}, {4, 2, 0}};
  int h = 1;
  std::vector<int> chain{h};
  for (auto& row : sizes) {
    h = (h - 1) * row[1] + row[0];
    chain.push_back(h);
  }
  CHECK(chain == std::vector<int>{1, 2, 6, 13, 28});

  bingan::TransConv2DLayer<double> tc(3, 2, 4, 4, 2, 2, Activation::kLinear, Init::kHeUniform, rng);
  TensorD y = tc.forward(TensorD::zeros({2, 3, 13, 13}), Mode::kTrain);
  CHECK(y.shape() == bingan::Shape{2, 2, 28, 28});

  bingan::MaxPool2DLayer<double> pool(2, 2);
  CHECK(pool.forward(TensorD::zeros({1, 1, 28, 28}), Mode::kTrain).shape() ==
        bingan::Shape{1, 1, 14, 14});

  bingan::Conv2DLayer<double> same(1, 4, 3, 3, 1, 1, bingan::PadMode::kSame, Activation::kLinear,
                                   Init::kHeUniform, rng);
  CHECK(same.forward(TensorD::zeros({1, 1, 28, 28}), Mode::kTrain).shape() ==
        bingan::Shape{1, 4, 28, 28});
}

TEST_CASE("conv2d equals the brute-force oracle exactly on small integer inputs") {
  bingan::RngStream rng(3);
  for (int h = 1; h <= 6; ++h)
    for (int kh = 1; kh <= h; ++kh)
      for (int stride : {1, 2}) {
        int n = 2, ci = 2, co = 3;
        std::vector<double> xv(static_cast<std::size_t>(n * ci * h * h));
        std::vector<double> kv(static_cast<std::size_t>(co * ci * kh * kh));
        for (auto& v : xv) v = static_cast<double>(static_cast<int>(rng.below(9)) - 4);
        for (auto& v : kv) v = static_cast<double>(static_cast<int>(rng.below(9)) - 4);
        TensorD x = TensorD::from({n, ci, h, h}, xv);
        TensorD k = TensorD::from({co, ci, kh, kh}, kv);

        auto geo = bingan::conv_geometry(h, h, kh, kh, stride, stride, bingan::PadMode::kValid);
        auto want = oracles::conv2d_brute(xv, n, ci, h, h, kv, co, kh, kh, stride, stride, 0, 0,
                                          geo.out_h, geo.out_w);
        TensorD got = bingan::conv2d(x, k, geo);
        REQUIRE(got.numel() == static_cast<std::int64_t>(want.size()));
        for (std::int64_t i = 0; i < got.numel(); ++i)
          CHECK(got.at(i) == want[static_cast<std::size_t>(i)]);

        auto geo_same = bingan::conv_geometry(h, h, kh, kh, 1, 1, bingan::PadMode::kSame);
        auto want_same = oracles::conv2d_brute(xv, n, ci, h, h, kv, co, kh, kh, 1, 1, geo_same.pad_t,
                                               geo_same.pad_l, geo_same.out_h, geo_same.out_w);
        TensorD got_same = bingan::conv2d(x, k, geo_same);
        for (std::int64_t i = 0; i < got_same.numel(); ++i)
          CHECK(got_same.at(i) == want_same[static_cast<std::size_t>(i)]);

        auto want_t = oracles::transconv2d_brute(xv, n, ci, h, h, kv, co, kh, kh, stride, stride);
        // transconv kernels are [out, in, kh, kw]: rebuild with ci/co roles swapped
        std::vector<double> ktv(static_cast<std::size_t>(co * ci * kh * kh));
        for (int oc = 0; oc < co; ++oc)
          for (int ic = 0; ic < ci; ++ic)
            for (int i = 0; i < kh * kh; ++i)
              ktv[(static_cast<std::size_t>(oc) * ci + ic) * kh * kh + i] =
                  kv[(static_cast<std::size_t>(oc) * ci + ic) * kh * kh + i];
        TensorD got_t = bingan::transconv2d(x, TensorD::from({co, ci, kh, kh}, ktv), stride, stride);
        REQUIRE(got_t.numel() == static_cast<std::int64_t>(want_t.size()));
        for (std::int64_t i = 0; i < got_t.numel(); ++i)
          CHECK(got_t.at(i) == want_t[static_cast<std::size_t>(i)]);
      }
}

TEST_CASE("transconv2d is the adjoint of conv2d with the same kernel") {
  bingan::RngStream rng(4);
  for (int stride : {1, 2}) {
    int n = 2, ci = 3, co = 2, h = 6, k = 3;
    auto geo = bingan::conv_geometry(h, h, k, k, stride, stride, bingan::PadMode::kValid);
    auto fill = [&](bingan::Shape s) {
      std::vector<double> v(static_cast<std::size_t>(bingan::shape_numel(s)));
      for (auto& x : v) x = rng.uniform(-1, 1);
      return TensorD::from(s, v);
    };
    TensorD x = fill({n, ci, h, h});
    TensorD w = fill({co, ci, k, k});
    TensorD y = fill({n, co, geo.out_h, geo.out_w});

    TensorD cx = bingan::conv2d(x, w, geo);
    TensorD ty = bingan::conv2d_data_grad(y, w, geo);
    double lhs = 0, rhs = 0;
    for (std::int64_t i = 0; i < cx.numel(); ++i) lhs += cx.at(i) * y.at(i);
    for (std::int64_t i = 0; i < x.numel(); ++i) rhs += x.at(i) * ty.at(i);
    CHECK(std::abs(lhs - rhs) < 1e-5);
  }
}

TEST_CASE("batchnorm train and eval semantics") {
  SUBCASE("constant batch maps to beta") {
    bingan::BatchNormLayer<double> bn(3);
    std::vector<bingan::NamedTensor<double>> params;
    bn.collect_trainable("bn", params);
    REQUIRE(params.size() == 2);
    double* beta = params[1].tensor.mutable_data();
    beta[0] = 0.3;
    beta[1] = -0.7;
    beta[2] = 1.1;
    TensorD x = TensorD::from({4, 3}, std::vector<double>(12, 5.0));
    TensorD y = bn.forward(x, Mode::kTrain);
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 3; ++c)
        CHECK(y.at(i * 3 + c) == doctest::Approx(beta[c]).epsilon(1e-2));
  }

  SUBCASE("standardized input passes through with gamma=1 beta=0") {
    bingan::BatchNormLayer<double> bn(1);
    TensorD x = TensorD::from({4, 1}, {-1.5, -0.5, 0.5, 1.5});  // mean 0, var 1.25
    double sd = std::sqrt(1.25);
    TensorD y = bn.forward(x, Mode::kTrain);
    for (int i = 0; i < 4; ++i) CHECK(y.at(i) == doctest::Approx(x.at(i) / sd).epsilon(1e-3));
  }

  SUBCASE("eval converges to train output after many identical batches") {
    bingan::RngStream rng(7);
    bingan::BatchNormLayer<double> bn(2);
    std::vector<double> v(16);
    for (auto& e : v) e = rng.uniform(-2, 2);
    TensorD x = TensorD::from({8, 2}, v);
    TensorD train_out;
    for (int i = 0; i < 200; ++i) train_out = bn.forward(x, Mode::kTrain);
    TensorD eval_out = bn.forward(x, Mode::kEval);
    for (std::int64_t i = 0; i < x.numel(); ++i)
      CHECK(std::abs(eval_out.at(i) - train_out.at(i)) < 1e-3);
  }

  SUBCASE("batch of one in train mode is an error") {
    bingan::BatchNormLayer<double> bn(2);
    CHECK_THROWS_AS(bn.forward(TensorD::zeros({1, 2}), Mode::kTrain), bingan::TensorError);
  }

  SUBCASE("eval mode never touches the running stats") {
    bingan::BatchNormLayer<double> bn(2);
    bingan::RngStream rng(8);
    std::vector<double> v(12);
    for (auto& e : v) e = rng.uniform(-1, 1);
    bn.forward(TensorD::from({6, 2}, v), Mode::kTrain);
    auto mean_before = bn.running_mean().vec();
    auto var_before = bn.running_var().vec();
    bn.forward(TensorD::from({6, 2}, v), Mode::kEval);
    CHECK(bn.running_mean().vec() == mean_before);
    CHECK(bn.running_var().vec() == var_before);
  }

  SUBCASE("spatial batchnorm normalizes per channel") {
    bingan::BatchNormLayer<double> bn(2);
    bingan::RngStream rng(9);
    std::vector<double> v(2 * 2 * 3 * 3);
    for (auto& e : v) e = rng.uniform(-1, 1);
    TensorD y = bn.forward(TensorD::from({2, 2, 3, 3}, v), Mode::kTrain);
    for (int c = 0; c < 2; ++c) {
      double mean = 0;
      for (int n = 0; n < 2; ++n)
        for (int i = 0; i < 9; ++i) mean += y.at((n * 2 + c) * 9 + i);
      CHECK(std::abs(mean / 18.0) < 1e-10);
    }
  }
}

TEST_CASE("batchnorm backward matches finite differences") {
  bingan::RngStream rng(10);
  bingan::BatchNormLayer<double> bn(3);
  std::vector<bingan::NamedTensor<double>> params;
  bn.collect_trainable("bn", params);
  std::vector<double> v(12);
  for (auto& e : v) e = rng.uniform(-1, 1);
  TensorD x = TensorD::from({4, 3}, v);
  x.set_requires_grad(true);

  auto make_loss = [&] { return bingan::mean_all(bingan::square(bn.forward(x, Mode::kTrain))); };
  TensorD loss = make_loss();
  x.zero_grad();
  for (auto& p : params) p.tensor.zero_grad();
  bingan::backward(loss);
  for (auto leaf : {x, params[0].tensor, params[1].tensor}) {
    auto numeric = oracles::numeric_gradient(leaf, [&] {
      bingan::NoGradGuard off;
      return make_loss().item();
    });
    for (std::int64_t i = 0; i < leaf.numel(); ++i)
      CHECK(oracles::rel_error(leaf.grad().at(i), numeric[static_cast<std::size_t>(i)]) < 1e-4);
  }
}

TEST_CASE("initialization scaling") {
  SUBCASE("fixed seed reproduces parameters bit for bit") {
    bingan::RngStream a(42), b(42);
    bingan::DenseLayer<double> l1(64, 32, Activation::kRelu, Init::kHeUniform, a);
    bingan::DenseLayer<double> l2(64, 32, Activation::kRelu, Init::kHeUniform, b);
    CHECK(l1.weight().vec() == l2.weight().vec());
  }

  SUBCASE("He bound for fan-in 1024") {
    double bound = std::sqrt(6.0 / 1024.0);
    bingan::RngStream rng(43);
    TensorD w = bingan::init_weights<double>({1024, 8}, 1024, 8, Init::kHeUniform, rng);
    double max_abs = 0;
    for (std::int64_t i = 0; i < w.numel(); ++i) max_abs = std::max(max_abs, std::abs(w.at(i)));
    CHECK(max_abs <= bound);
    CHECK(max_abs > 0.9 * bound);
  }

  SUBCASE("empirical stddev within 5% of uniform theory") {
    bingan::RngStream rng(44);
    int fan_in = 100, fan_out = 1000;  // 1e5 samples
    TensorD w = bingan::init_weights<double>({fan_in, fan_out}, fan_in, fan_out,
                                             Init::kGlorotUniform, rng);
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double want_sd = bound / std::sqrt(3.0);
    double acc = 0;
    for (std::int64_t i = 0; i < w.numel(); ++i) acc += w.at(i) * w.at(i);
    double got_sd = std::sqrt(acc / static_cast<double>(w.numel()));
    CHECK(std::abs(got_sd - want_sd) / want_sd < 0.05);
  }

  SUBCASE("biases start at zero") {
    bingan::RngStream rng(45);
    bingan::DenseLayer<double> l(8, 8, Activation::kSigmoid, Init::kGlorotUniform, rng);
    for (std::int64_t i = 0; i < l.bias().numel(); ++i) CHECK(l.bias().at(i) == 0.0);
  }
}
