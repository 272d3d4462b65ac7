#ifndef BINGAN_BINARY_NEURONS_HPP_
#define BINGAN_BINARY_NEURONS_HPP_

// Deterministic and stochastic binary output neurons with sigmoid-adjusted
// straight-through gradients and slope annealing.
//
// Forward: p = sigma(tau * x), then a hard threshold (deterministic) or a
// Bernoulli draw (stochastic); both emit exactly 0.0 or 1.0. The unit step is
// taken with u(0) = 1, so a tie at p = 0.5 fires. Backward substitutes the
// sigmoid derivative: upstream * tau * p * (1 - p). The binarization itself
// is first-order only; a second-order pass through it is rejected.

#include <utility>
#include <vector>

#include "bingan/rng.hpp"
#include "bingan/tensor.hpp"

namespace bingan {

enum class NeuronMode { kDeterministic, kStochastic, kRealValued };

inline const char* neuron_mode_name(NeuronMode m) {
  switch (m) {
    case NeuronMode::kDeterministic: return "deterministic";
    case NeuronMode::kStochastic: return "stochastic";
    case NeuronMode::kRealValued: return "real";
  }
  return "?";
}

// The preactivated outputs sigma(tau * x), held outside the graph.
template <typename T>
struct PreactivationRecord {
  Tensor<T> preact;
};

namespace detail {
template <typename T>
std::vector<T> preactivations(const Tensor<T>& x, double tau) {
  std::vector<T> p(x.vec());
  for (auto& v : p) {
    double d = tau * static_cast<double>(v);
    v = static_cast<T>(d >= 0.0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d)));
  }
  return p;
}
}  // namespace detail

// Straight-through gradient: upstream * tau * p * (1 - p), the analytic
// derivative of the preactivation sigma(tau x) w.r.t. x. Identical rule for
// both neuron types.
template <typename T>
Tensor<T> ste_backward(const Tensor<T>& upstream, const PreactivationRecord<T>& record,
                       double tau) {
  if (!same_shape(upstream.shape(), record.preact.shape()))
    fail_op("ste_backward", "upstream " + shape_str(upstream.shape()) + " vs record " +
                                shape_str(record.preact.shape()));
  std::vector<T> out(upstream.vec());
  const T* p = record.preact.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double pi = static_cast<double>(p[i]);
    out[i] = static_cast<T>(static_cast<double>(out[i]) * tau * pi * (1.0 - pi));
  }
  return Tensor<T>::from(upstream.shape(), std::move(out));
}

namespace detail {
template <typename T>
std::pair<Tensor<T>, PreactivationRecord<T>> binary_node(const char* name, const Tensor<T>& x,
                                                         double tau, std::vector<T> preact,
                                                         std::vector<T> binary) {
  PreactivationRecord<T> record{Tensor<T>::from(x.shape(), std::move(preact))};
  Tensor<T> out = custom_unary<T>(
      name, x, std::move(binary),
      [record, tau, shape = x.shape()](const std::vector<T>& upstream) {
        Tensor<T> up = Tensor<T>::from(shape, upstream);
        return ste_backward(up, record, tau).vec();
      });
  return {out, record};
}
}  // namespace detail

// Deterministic binary neuron: hard threshold on the preactivation.
template <typename T>
std::pair<Tensor<T>, PreactivationRecord<T>> dbn_forward(const Tensor<T>& x, double tau) {
  std::vector<T> p = detail::preactivations(x, tau);
  std::vector<T> bin(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bin[i] = p[i] >= T(0.5) ? T(1) : T(0);
  return detail::binary_node("dbn", x, tau, std::move(p), std::move(bin));
}

// Stochastic binary neuron with caller-supplied noise, u(p - v) per element.
template <typename T>
std::pair<Tensor<T>, PreactivationRecord<T>> sbn_forward_given(const Tensor<T>& x, double tau,
                                                               const std::vector<T>& noise) {
  std::vector<T> p = detail::preactivations(x, tau);
  if (noise.size() != p.size()) fail_op("sbn", "noise size does not match input");
  std::vector<T> bin(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bin[i] = p[i] >= noise[i] ? T(1) : T(0);
  return detail::binary_node("sbn", x, tau, std::move(p), std::move(bin));
}

// Stochastic binary neuron: Bernoulli sampling as the activation.
template <typename T>
std::pair<Tensor<T>, PreactivationRecord<T>> sbn_forward(const Tensor<T>& x, double tau,
                                                         RngStream& rng) {
  std::vector<T> noise(static_cast<std::size_t>(x.numel()));
  for (auto& v : noise) v = static_cast<T>(rng.uniform());
  return sbn_forward_given(x, tau, noise);
}

// Generator output unit. Holds the neuron mode, the annealed slope tau and
// the Bernoulli stream. Real-valued mode is a plain sigmoid (tau unused) and
// stays differentiable; the record then holds the probabilistic outputs.
template <typename T>
class BinaryOutputLayer {
 public:
  BinaryOutputLayer(NeuronMode mode, RngStream rng, bool anneal_enabled = true)
      : mode_(mode), rng_(rng), anneal_enabled_(anneal_enabled) {}

  Tensor<T> forward(const Tensor<T>& x) {
    switch (mode_) {
      case NeuronMode::kDeterministic: {
        auto [out, rec] = dbn_forward(x, tau_);
        record_ = rec;
        return out;
      }
      case NeuronMode::kStochastic: {
        auto [out, rec] = sbn_forward(x, tau_, rng_);
        record_ = rec;
        return out;
      }
      case NeuronMode::kRealValued: {
        Tensor<T> out = sigmoid(x);
        record_ = PreactivationRecord<T>{out.detach()};
        return out;
      }
    }
    fail_op("binary_output", "unknown neuron mode");
  }

  // Slope annealing: tau <- 1.1 * tau, called once per completed epoch.
  void anneal_slope() {
    if (anneal_enabled_) tau_ *= 1.1;
  }

  double tau() const { return tau_; }
  void set_tau(double t) {
    if (!(t > 0.0)) fail_op("binary_output", "slope must stay positive");
    tau_ = t;
  }
  NeuronMode mode() const { return mode_; }
  bool anneal_enabled() const { return anneal_enabled_; }
  void set_anneal_enabled(bool on) { anneal_enabled_ = on; }
  RngStream& rng() { return rng_; }
  const PreactivationRecord<T>& last_record() const { return record_; }

 private:
  NeuronMode mode_;
  double tau_ = 1.0;
  RngStream rng_;
  bool anneal_enabled_;
  PreactivationRecord<T> record_{};
};

}  // namespace bingan

#endif  // BINGAN_BINARY_NEURONS_HPP_
