#ifndef BINGAN_MODEL_ZOO_HPP_
#define BINGAN_MODEL_ZOO_HPP_

// Constructors for the MLP and CNN generator/discriminator stacks and the
// real-valued baseline, with objective-dependent head and batch-norm
// placement. Binary neurons appear only at the generator's output layer.

#include <memory>
#include <string>
#include <vector>

#include "bingan/binary_neurons.hpp"
#include "bingan/layers.hpp"
#include "bingan/objectives.hpp"

namespace bingan {

enum class Family { kMlp, kCnn };

inline const char* family_name(Family f) { return f == Family::kMlp ? "mlp" : "cnn"; }

// Batch-norm defaults: GAN trains with BN in both networks, the WGAN kinds
// with BN in the generator only.
inline bool default_bn_in_d(ObjectiveKind kind) { return kind == ObjectiveKind::kGan; }

struct ModelSpec {
  Family family = Family::kMlp;
  NeuronMode neurons = NeuronMode::kDeterministic;
  ObjectiveKind objective = ObjectiveKind::kWganGp;
  bool bn_in_g = true;
  bool bn_in_d = default_bn_in_d(ObjectiveKind::kWganGp);
  int latent_dim = 128;

  static ModelSpec make(Family family, NeuronMode neurons, ObjectiveKind objective) {
    ModelSpec s;
    s.family = family;
    s.neurons = neurons;
    s.objective = objective;
    s.bn_in_d = default_bn_in_d(objective);
    return s;
  }
};

template <typename T>
class Network {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> h = x;
    for (auto& layer : layers_) h = layer->forward(h, mode);
    if (output_) h = output_->forward(h);
    return h;
  }

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  void set_output(std::unique_ptr<BinaryOutputLayer<T>> out) { output_ = std::move(out); }
  BinaryOutputLayer<T>* binary_output() { return output_.get(); }
  const BinaryOutputLayer<T>* binary_output() const { return output_.get(); }

  std::vector<NamedTensor<T>> trainable(const std::string& prefix) const {
    std::vector<NamedTensor<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_trainable(prefix + "." + std::to_string(i) + "." + layers_[i]->kind(), out);
    return out;
  }

  std::vector<NamedTensor<T>> state(const std::string& prefix) const {
    std::vector<NamedTensor<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_state(prefix + "." + std::to_string(i) + "." + layers_[i]->kind(), out);
    return out;
  }

  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> out;
    for (const auto& nt : trainable("p")) out.push_back(nt.tensor);
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
  }

  const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }

  bool sigmoid_head() const { return sigmoid_head_; }
  void mark_sigmoid_head(bool v) { sigmoid_head_ = v; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::unique_ptr<BinaryOutputLayer<T>> output_;
  bool sigmoid_head_ = false;
};

// Standard-normal latent batch [n, latent_dim].
template <typename T>
Tensor<T> sample_latent(int n, int latent_dim, RngStream& rng) {
  std::vector<T> v(static_cast<std::size_t>(n) * latent_dim);
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return Tensor<T>::from({n, latent_dim}, std::move(v));
}

// Generator MLP: dense latent->1024 (ReLU) then dense 1024->784 feeding the
// binary output layer (or a plain sigmoid for the real-valued baseline).
// Batch norm sits between the hidden affine and its activation when enabled.
template <typename T>
Network<T> build_mlp_generator(const ModelSpec& spec, RngStream init_rng) {
  Network<T> net;
  RngStream l0 = init_rng.derive("g.dense0");
  net.add(std::make_unique<DenseLayer<T>>(spec.latent_dim, 1024, Activation::kLinear,
                                          Init::kHeUniform, l0));
  if (spec.bn_in_g) net.add(std::make_unique<BatchNormLayer<T>>(1024));
  net.add(std::make_unique<ActivationLayer<T>>(Activation::kRelu));
  RngStream l1 = init_rng.derive("g.dense1");
  net.add(std::make_unique<DenseLayer<T>>(1024, 784, Activation::kLinear, Init::kGlorotUniform, l1));
  net.set_output(std::make_unique<BinaryOutputLayer<T>>(spec.neurons, init_rng.derive("g.bernoulli")));
  return net;
}

// Discriminator MLP: dense 784->512->256->1 with LeakyReLU hidden units and a
// sigmoid head only for the GAN objective.
template <typename T>
Network<T> build_mlp_discriminator(const ModelSpec& spec, RngStream init_rng) {
  Network<T> net;
  const int widths[3] = {512, 256, 1};
  int in = 784;
  for (int i = 0; i < 2; ++i) {
    RngStream l = init_rng.derive("d.dense" + std::to_string(i));
    net.add(std::make_unique<DenseLayer<T>>(in, widths[i], Activation::kLinear, Init::kHeUniform, l));
    if (spec.bn_in_d) net.add(std::make_unique<BatchNormLayer<T>>(widths[i]));
    net.add(std::make_unique<ActivationLayer<T>>(Activation::kLeakyRelu));
    in = widths[i];
  }
  RngStream head = init_rng.derive("d.dense2");
  net.add(std::make_unique<DenseLayer<T>>(in, 1, Activation::kLinear, Init::kGlorotUniform, head));
  if (spec.objective == ObjectiveKind::kGan) {
    net.add(std::make_unique<ActivationLayer<T>>(Activation::kSigmoid));
    net.mark_sigmoid_head(true);
  }
  return net;
}

// Generator CNN: latent reshaped to a 1x1 map, then four valid transposed
// convolutions growing the spatial chain 1 -> 2 -> 6 -> 13 -> 28.
template <typename T>
Network<T> build_cnn_generator(const ModelSpec& spec, RngStream init_rng) {
  Network<T> net;
  net.add(std::make_unique<ToFeatureMapLayer<T>>());
  struct Row {
    int out_ch, k, s;
  };
  const Row rows[3] = {{128, 2, 1}, {64, 4, 2}, {32, 3, 2}};
  int in_ch = spec.latent_dim;
  for (int i = 0; i < 3; ++i) {
    RngStream l = init_rng.derive("g.transconv" + std::to_string(i));
    net.add(std::make_unique<TransConv2DLayer<T>>(in_ch, rows[i].out_ch, rows[i].k, rows[i].k,
                                                  rows[i].s, rows[i].s, Activation::kLinear,
                                                  Init::kHeUniform, l));
    if (spec.bn_in_g) net.add(std::make_unique<BatchNormLayer<T>>(rows[i].out_ch));
    net.add(std::make_unique<ActivationLayer<T>>(Activation::kRelu));
    in_ch = rows[i].out_ch;
  }
  RngStream l3 = init_rng.derive("g.transconv3");
  net.add(std::make_unique<TransConv2DLayer<T>>(in_ch, 1, 4, 4, 2, 2, Activation::kLinear,
                                                Init::kGlorotUniform, l3));
  net.set_output(std::make_unique<BinaryOutputLayer<T>>(spec.neurons, init_rng.derive("g.bernoulli")));
  return net;
}

// Discriminator CNN: two same-padded conv + maxpool blocks, flatten to 3136,
// dense 128, dense 1; sigmoid head only for the GAN objective.
template <typename T>
Network<T> build_cnn_discriminator(const ModelSpec& spec, RngStream init_rng) {
  Network<T> net;
  struct Block {
    int in_ch, out_ch;
  };
  const Block blocks[2] = {{1, 32}, {32, 64}};
  for (int i = 0; i < 2; ++i) {
    RngStream l = init_rng.derive("d.conv" + std::to_string(i));
    net.add(std::make_unique<Conv2DLayer<T>>(blocks[i].in_ch, blocks[i].out_ch, 3, 3, 1, 1,
                                             PadMode::kSame, Activation::kLinear,
                                             Init::kHeUniform, l));
    if (spec.bn_in_d) net.add(std::make_unique<BatchNormLayer<T>>(blocks[i].out_ch));
    net.add(std::make_unique<ActivationLayer<T>>(Activation::kLeakyRelu));
    net.add(std::make_unique<MaxPool2DLayer<T>>(2, 2));
  }
  net.add(std::make_unique<FlattenLayer<T>>());
  RngStream d0 = init_rng.derive("d.dense0");
  net.add(std::make_unique<DenseLayer<T>>(7 * 7 * 64, 128, Activation::kLinear, Init::kHeUniform, d0));
  if (spec.bn_in_d) net.add(std::make_unique<BatchNormLayer<T>>(128));
  net.add(std::make_unique<ActivationLayer<T>>(Activation::kLeakyRelu));
  RngStream d1 = init_rng.derive("d.dense1");
  net.add(std::make_unique<DenseLayer<T>>(128, 1, Activation::kLinear, Init::kGlorotUniform, d1));
  if (spec.objective == ObjectiveKind::kGan) {
    net.add(std::make_unique<ActivationLayer<T>>(Activation::kSigmoid));
    net.mark_sigmoid_head(true);
  }
  return net;
}

template <typename T>
Network<T> build_generator(const ModelSpec& spec, RngStream init_rng) {
  return spec.family == Family::kMlp ? build_mlp_generator<T>(spec, init_rng)
                                     : build_cnn_generator<T>(spec, init_rng);
}

template <typename T>
Network<T> build_discriminator(const ModelSpec& spec, RngStream init_rng) {
  return spec.family == Family::kMlp ? build_mlp_discriminator<T>(spec, init_rng)
                                     : build_cnn_discriminator<T>(spec, init_rng);
}

// Head/objective compatibility: the GAN losses need (0,1) outputs, the
// Wasserstein kinds an unbounded critic.
inline void check_head_compatibility(bool has_sigmoid_head, ObjectiveKind kind) {
  if (kind == ObjectiveKind::kGan && !has_sigmoid_head)
    throw TensorError("GAN objective requires a sigmoid discriminator head");
  if (kind != ObjectiveKind::kGan && has_sigmoid_head)
    throw TensorError("Wasserstein objectives require a linear discriminator head");
}

}  // namespace bingan

#endif  // BINGAN_MODEL_ZOO_HPP_
