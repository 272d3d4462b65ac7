#ifndef BINGAN_OPTIMIZERS_HPP_
#define BINGAN_OPTIMIZERS_HPP_

// Parameter-update rules used in training: Adam, RMSProp and hard weight
// clipping for the WGAN critic. State is plain per-parameter arrays so it
// serializes losslessly through the checkpoint format.

#include <cmath>
#include <string>
#include <vector>

#include "bingan/tensor.hpp"

namespace bingan {

namespace detail {
template <typename T>
void check_grads_before_step(const std::vector<Tensor<T>>& params) {
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (T v : p.grad().vec())
      if (std::isnan(static_cast<double>(v)))
        throw TensorError("optimizer: NaN gradient, refusing to update parameters");
  }
}
}  // namespace detail

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
  for (auto& p : params) p.zero_grad();
}

// Clamps every value into [-c, c]. Applied to the critic after each WGAN
// discriminator update.
template <typename T>
void clip_weights(std::vector<Tensor<T>>& params, double c) {
  if (!(c > 0.0)) throw TensorError("clip_weights: bound must be positive");
  for (auto& p : params) {
    T* v = p.mutable_data();
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      if (v[i] > static_cast<T>(c)) v[i] = static_cast<T>(c);
      if (v[i] < static_cast<T>(-c)) v[i] = static_cast<T>(-c);
    }
  }
}

// Bias-corrected Adam.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Tensor<T>> params, double alpha = 1e-4, double beta1 = 0.5,
                         double beta2 = 0.9, double epsilon = 1e-8)
      : params_(std::move(params)), alpha_(alpha), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    for (const auto& p : params_) {
      m_.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
      v_.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
    }
  }

  void step() {
    detail::check_grads_before_step(params_);
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<T>& p = params_[k];
      const T* g = p.has_grad() ? p.grad().data() : nullptr;
      T* pv = p.mutable_data();
      for (std::int64_t i = 0; i < p.numel(); ++i) {
        double gi = g ? static_cast<double>(g[i]) : 0.0;
        double mi = beta1_ * static_cast<double>(m_[k][static_cast<std::size_t>(i)]) + (1 - beta1_) * gi;
        double vi = beta2_ * static_cast<double>(v_[k][static_cast<std::size_t>(i)]) + (1 - beta2_) * gi * gi;
        m_[k][static_cast<std::size_t>(i)] = static_cast<T>(mi);
        v_[k][static_cast<std::size_t>(i)] = static_cast<T>(vi);
        double update = alpha_ * (mi / bc1) / (std::sqrt(vi / bc2) + eps_);
        pv[i] = static_cast<T>(static_cast<double>(pv[i]) - update);
      }
    }
  }

  void zero_grad() { zero_grads(params_); }

  std::int64_t step_count() const { return t_; }
  const std::vector<Tensor<T>>& params() const { return params_; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void restore(std::vector<std::vector<T>> m, std::vector<std::vector<T>> v, std::int64_t t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  std::vector<Tensor<T>> params_;
  double alpha_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

// RMSProp: acc <- rho*acc + (1-rho)*g^2; param <- param - lr*g/(sqrt(acc)+eps).
template <typename T>
class RmsPropOptimizer {
 public:
  explicit RmsPropOptimizer(std::vector<Tensor<T>> params, double lr = 1e-4, double rho = 0.9,
                            double epsilon = 1e-8)
      : params_(std::move(params)), lr_(lr), rho_(rho), eps_(epsilon) {
    for (const auto& p : params_)
      acc_.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
  }

  void step() {
    detail::check_grads_before_step(params_);
    ++t_;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<T>& p = params_[k];
      const T* g = p.has_grad() ? p.grad().data() : nullptr;
      T* pv = p.mutable_data();
      for (std::int64_t i = 0; i < p.numel(); ++i) {
        double gi = g ? static_cast<double>(g[i]) : 0.0;
        double ai = rho_ * static_cast<double>(acc_[k][static_cast<std::size_t>(i)]) + (1 - rho_) * gi * gi;
        acc_[k][static_cast<std::size_t>(i)] = static_cast<T>(ai);
        pv[i] = static_cast<T>(static_cast<double>(pv[i]) - lr_ * gi / (std::sqrt(ai) + eps_));
      }
    }
  }

  void zero_grad() { zero_grads(params_); }

  std::int64_t step_count() const { return t_; }
  const std::vector<Tensor<T>>& params() const { return params_; }
  std::vector<std::vector<T>>& accumulators() { return acc_; }
  void restore(std::vector<std::vector<T>> acc, std::int64_t t) {
    acc_ = std::move(acc);
    t_ = t;
  }

 private:
  std::vector<Tensor<T>> params_;
  double lr_, rho_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> acc_;
};

}  // namespace bingan

#endif  // BINGAN_OPTIMIZERS_HPP_
