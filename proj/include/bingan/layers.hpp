#ifndef BINGAN_LAYERS_HPP_
#define BINGAN_LAYERS_HPP_

// Network building blocks: dense, conv, transposed conv, max pooling, batch
// normalization, activations, and parameter initialization.

#include <memory>
#include <string>
#include <vector>

#include "bingan/rng.hpp"
#include "bingan/tensor.hpp"

namespace bingan {

enum class Activation { kLinear, kRelu, kLeakyRelu, kSigmoid };
enum class Init { kHeUniform, kGlorotUniform };
enum class Mode { kTrain, kEval };

// Negative slope used for every LeakyReLU in the models.
inline constexpr double kLeakySlope = 0.2;

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation act) {
  switch (act) {
    case Activation::kLinear: return x;
    case Activation::kRelu: return relu(x);
    case Activation::kLeakyRelu: return leaky_relu(x, kLeakySlope);
    case Activation::kSigmoid: return sigmoid(x);
  }
  return x;
}

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

// Uniform fan-scaled initialization; biases stay zero.
template <typename T>
Tensor<T> init_weights(Shape shape, int fan_in, int fan_out, Init init, RngStream& rng) {
  double bound = init == Init::kHeUniform ? std::sqrt(6.0 / fan_in)
                                          : std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  Tensor<T> t = Tensor<T>::from(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual const char* kind() const = 0;
  // Trainable parameters, in a stable order used for optimizers and checkpoints.
  virtual void collect_trainable(const std::string& prefix, std::vector<NamedTensor<T>>& out) {}
  // Non-trainable state (batch-norm running stats).
  virtual void collect_state(const std::string& prefix, std::vector<NamedTensor<T>>& out) {}
};

template <typename T>
class DenseLayer : public Layer<T> {
 public:
  DenseLayer(int in, int out, Activation act, Init init, RngStream& rng)
      : in_(in), out_(out), act_(act) {
    weight_ = init_weights<T>({in, out}, in, out, init, rng);
    bias_ = Tensor<T>::zeros({out});
    bias_.set_requires_grad(true);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.ndim() != 2 || x.dim(1) != in_)
      fail_op("dense", "input " + shape_str(x.shape()) + " does not match fan-in " +
                           std::to_string(in_));
    return apply_activation(add_bias(matmul(x, weight_), bias_), act_);
  }

  const char* kind() const override { return "dense"; }

  void collect_trainable(const std::string& prefix, std::vector<NamedTensor<T>>& out) override {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

  int fan_in() const { return in_; }
  int fan_out() const { return out_; }
  Activation activation() const { return act_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  int in_, out_;
  Activation act_;
  Tensor<T> weight_, bias_;
};

template <typename T>
class Conv2DLayer : public Layer<T> {
 public:
  Conv2DLayer(int in_ch, int out_ch, int k_h, int k_w, int stride_h, int stride_w, PadMode pad,
              Activation act, Init init, RngStream& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_h_(k_h), k_w_(k_w), stride_h_(stride_h),
        stride_w_(stride_w), pad_(pad), act_(act) {
    kernels_ = init_weights<T>({out_ch, in_ch, k_h, k_w}, in_ch * k_h * k_w, out_ch * k_h * k_w,
                               init, rng);
    bias_ = Tensor<T>::zeros({out_ch});
    bias_.set_requires_grad(true);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    auto geo = conv_geometry(x.dim(2), x.dim(3), k_h_, k_w_, stride_h_, stride_w_, pad_);
    return apply_activation(add_channel_bias(conv2d(x, kernels_, geo), bias_), act_);
  }

  const char* kind() const override { return "conv2d"; }

  void collect_trainable(const std::string& prefix, std::vector<NamedTensor<T>>& out) override {
    out.push_back({prefix + ".kernels", kernels_});
    out.push_back({prefix + ".bias", bias_});
  }

  Tensor<T>& kernels() { return kernels_; }

 private:
  int in_ch_, out_ch_, k_h_, k_w_, stride_h_, stride_w_;
  PadMode pad_;
  Activation act_;
  Tensor<T> kernels_, bias_;
};

// Transposed convolution with valid padding; output grows to (H-1)*s + k.
template <typename T>
class TransConv2DLayer : public Layer<T> {
 public:
  TransConv2DLayer(int in_ch, int out_ch, int k_h, int k_w, int stride_h, int stride_w,
                   Activation act, Init init, RngStream& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_h_(k_h), k_w_(k_w), stride_h_(stride_h),
        stride_w_(stride_w), act_(act) {
    kernels_ = init_weights<T>({out_ch, in_ch, k_h, k_w}, in_ch * k_h * k_w, out_ch * k_h * k_w,
                               init, rng);
    bias_ = Tensor<T>::zeros({out_ch});
    bias_.set_requires_grad(true);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    return apply_activation(add_channel_bias(transconv2d(x, kernels_, stride_h_, stride_w_), bias_),
                            act_);
  }

  const char* kind() const override { return "transconv2d"; }

  void collect_trainable(const std::string& prefix, std::vector<NamedTensor<T>>& out) override {
    out.push_back({prefix + ".kernels", kernels_});
    out.push_back({prefix + ".bias", bias_});
  }

 private:
  int in_ch_, out_ch_, k_h_, k_w_, stride_h_, stride_w_;
  Activation act_;
  Tensor<T> kernels_, bias_;
};

template <typename T>
class MaxPool2DLayer : public Layer<T> {
 public:
  MaxPool2DLayer(int k, int stride) : k_(k), stride_(stride) {}

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    return maxpool2d(x, k_, k_, stride_, stride_);
  }

  const char* kind() const override { return "maxpool2d"; }

 private:
  int k_, stride_;
};

template <typename T>
class ActivationLayer : public Layer<T> {
 public:
  explicit ActivationLayer(Activation act) : act_(act) {}
  Tensor<T> forward(const Tensor<T>& x, Mode) override { return apply_activation(x, act_); }
  const char* kind() const override { return activation_name(act_); }

 private:
  Activation act_;
};

template <typename T>
class FlattenLayer : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    return reshape(x, {x.dim(0), static_cast<int>(x.numel() / x.dim(0))});
  }
  const char* kind() const override { return "flatten"; }
};

// Reshapes [N, D] into [N, D, 1, 1] (latent vector to 1x1 feature map).
template <typename T>
class ToFeatureMapLayer : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    return reshape(x, {x.dim(0), x.dim(1), 1, 1});
  }
  const char* kind() const override { return "to_feature_map"; }
};

// Batch normalization over the batch dim (2-D input) or batch+spatial dims
// (NCHW input). Train mode normalizes by batch statistics and folds them into
// the running stats; eval mode is a pure function of the running stats.
template <typename T>
class BatchNormLayer : public Layer<T> {
 public:
  explicit BatchNormLayer(int channels, double momentum = 0.9, double epsilon = 1e-5)
      : channels_(channels), momentum_(momentum), epsilon_(epsilon) {
    gamma_ = Tensor<T>::full({channels}, T(1));
    gamma_.set_requires_grad(true);
    beta_ = Tensor<T>::zeros({channels});
    beta_.set_requires_grad(true);
    running_mean_ = Tensor<T>::zeros({channels});
    running_var_ = Tensor<T>::full({channels}, T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    bool spatial = x.ndim() == 4;
    if (!spatial && x.ndim() != 2)
      fail_op("batchnorm", "expects 2-D or NCHW input, got " + shape_str(x.shape()));
    int ch = spatial ? x.dim(1) : x.dim(1);
    if (ch != channels_)
      fail_op("batchnorm", "channel mismatch, layer has " + std::to_string(channels_) +
                               ", input " + shape_str(x.shape()));
    if (mode == Mode::kTrain) {
      std::int64_t count = spatial ? x.numel() / channels_ : x.dim(0);
      if (x.dim(0) < 2)
        fail_op("batchnorm", "train mode needs batch >= 2, got batch " + std::to_string(x.dim(0)));
      Tensor<T> mu, var;
      if (spatial) {
        mu = affine(sum_to_channel(x), 1.0 / static_cast<double>(count), 0.0);
        Tensor<T> xc = sub(x, broadcast_channel(mu, x.shape()));
        var = affine(sum_to_channel(square(xc)), 1.0 / static_cast<double>(count), 0.0);
      } else {
        mu = affine(sum_to_feature(x), 1.0 / static_cast<double>(count), 0.0);
        Tensor<T> xc = sub(x, broadcast_feature(mu, x.dim(0)));
        var = affine(sum_to_feature(square(xc)), 1.0 / static_cast<double>(count), 0.0);
      }
      // Biased batch variance both for normalization and for the running
      // stats, so eval converges to the train-mode output on a repeated batch.
      for (int c = 0; c < channels_; ++c) {
        running_mean_.mutable_data()[c] =
            static_cast<T>(momentum_ * running_mean_.at(c) + (1.0 - momentum_) * mu.at(c));
        running_var_.mutable_data()[c] =
            static_cast<T>(momentum_ * running_var_.at(c) + (1.0 - momentum_) * var.at(c));
      }
      return normalize(x, mu, var, spatial);
    }
    return normalize(x, running_mean_, running_var_, spatial);
  }

  const char* kind() const override { return "batchnorm"; }

  void collect_trainable(const std::string& prefix, std::vector<NamedTensor<T>>& out) override {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }

  void collect_state(const std::string& prefix, std::vector<NamedTensor<T>>& out) override {
    out.push_back({prefix + ".running_mean", running_mean_});
    out.push_back({prefix + ".running_var", running_var_});
  }

  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }

 private:
  Tensor<T> normalize(const Tensor<T>& x, const Tensor<T>& mu, const Tensor<T>& var,
                      bool spatial) {
    Tensor<T> scale = mul(gamma_, pow_scalar(affine(var, 1.0, epsilon_), -0.5));
    if (spatial) {
      Tensor<T> y = mul(sub(x, broadcast_channel(mu, x.shape())),
                        broadcast_channel(scale, x.shape()));
      return add_channel_bias(y, beta_);
    }
    Tensor<T> y = mul(sub(x, broadcast_feature(mu, x.dim(0))),
                      broadcast_feature(scale, x.dim(0)));
    return add_bias(y, beta_);
  }

  int channels_;
  double momentum_, epsilon_;
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
};

}  // namespace bingan

#endif  // BINGAN_LAYERS_HPP_
