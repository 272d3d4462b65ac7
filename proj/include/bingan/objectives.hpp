#ifndef BINGAN_OBJECTIVES_HPP_
#define BINGAN_OBJECTIVES_HPP_

// The three adversarial objectives as paired generator/discriminator losses:
// non-saturating GAN, WGAN with weight clipping, and WGAN-GP with the
// differentiable gradient penalty on straight-line interpolates.

#include <string>
#include <utility>

#include "bingan/rng.hpp"
#include "bingan/tensor.hpp"

namespace bingan {

enum class ObjectiveKind { kGan, kWgan, kWganGp };

inline const char* objective_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kGan: return "gan";
    case ObjectiveKind::kWgan: return "wgan";
    case ObjectiveKind::kWganGp: return "wgan-gp";
  }
  return "?";
}

struct AdversarialObjective {
  ObjectiveKind kind = ObjectiveKind::kWganGp;
  double clip_bound = 0.01;  // WGAN weight clipping
  // The penalty is printed without a coefficient in the WGAN-GP objective;
  // lambda = 1 reproduces that literal form, 10 is the cited method's value.
  double gp_lambda = 10.0;
  int n_critic = 5;

  static AdversarialObjective make(ObjectiveKind kind) {
    AdversarialObjective o;
    o.kind = kind;
    o.n_critic = kind == ObjectiveKind::kGan ? 1 : 5;
    return o;
  }
};

template <typename T>
struct LossPair {
  Tensor<T> g_loss;
  Tensor<T> d_loss;
};

// Non-saturating GAN: g = -E[log D(fake)], d = -E[log D(real)] - E[log(1 - D(fake))].
// Requires a sigmoid discriminator head, so outputs must lie in (0,1).
template <typename T>
LossPair<T> gan_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  for (const Tensor<T>* t : {&d_real, &d_fake})
    for (T v : t->vec())
      if (!(v > T(0) && v < T(1)))
        fail_op("gan_losses", "discriminator output " + std::to_string(static_cast<double>(v)) +
                                  " outside (0,1); log domain needs a sigmoid head");
  Tensor<T> g = affine(mean_all(log_e(d_fake)), -1.0, 0.0);
  Tensor<T> d = add(affine(mean_all(log_e(d_real)), -1.0, 0.0),
                    affine(mean_all(log_e(affine(d_fake, -1.0, 1.0))), -1.0, 0.0));
  return {g, d};
}

// WGAN critic losses: g = -E[D(fake)], d = E[D(fake)] - E[D(real)].
template <typename T>
LossPair<T> wgan_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  Tensor<T> g = affine(mean_all(d_fake), -1.0, 0.0);
  Tensor<T> d = add(mean_all(d_fake), affine(mean_all(d_real), -1.0, 0.0));
  return {g, d};
}

// x_hat = eps * real + (1 - eps) * fake with one uniform eps per sample,
// shared across that sample's pixels. Returned as a fresh leaf that requires
// grad, ready for the gradient penalty.
template <typename T>
Tensor<T> interpolate_with(const Tensor<T>& real, const Tensor<T>& fake,
                           const std::vector<double>& eps) {
  detail::check_same_shape("sample_interpolates", real, fake);
  if (static_cast<int>(eps.size()) != real.dim(0))
    fail_op("sample_interpolates", "need one epsilon per sample");
  std::int64_t row = real.numel() / real.dim(0);
  std::vector<T> v(static_cast<std::size_t>(real.numel()));
  for (int i = 0; i < real.dim(0); ++i) {
    double e = eps[static_cast<std::size_t>(i)];
    const T* pr = real.data() + i * row;
    const T* pf = fake.data() + i * row;
    T* po = v.data() + i * row;
    for (std::int64_t j = 0; j < row; ++j)
      po[j] = static_cast<T>(e * static_cast<double>(pr[j]) +
                             (1.0 - e) * static_cast<double>(pf[j]));
  }
  Tensor<T> out = Tensor<T>::from(real.shape(), std::move(v));
  out.set_requires_grad(true);
  return out;
}

template <typename T>
Tensor<T> sample_interpolates(const Tensor<T>& real, const Tensor<T>& fake, RngStream& rng) {
  std::vector<double> eps(static_cast<std::size_t>(real.dim(0)));
  for (auto& e : eps) e = rng.uniform();
  return interpolate_with(real, fake, eps);
}

// lambda * E[(||grad_xhat D(xhat)||_2 - 1)^2], differentiable w.r.t. the
// critic's parameters through the double-backward machinery. The critic is
// passed as a callable so the penalty stays agnostic of the network type.
template <typename T, typename Critic>
Tensor<T> gradient_penalty(Critic&& critic, const Tensor<T>& x_hat, double lambda) {
  Tensor<T> d_out = critic(x_hat);
  Tensor<T> g = grad_wrt(sum_all(d_out), x_hat, /*create_graph=*/true);
  Tensor<T> norms = l2_norm_rows(g);
  return affine(mean_all(square(affine(norms, 1.0, -1.0))), lambda, 0.0);
}

// WGAN-GP: same generator loss as WGAN (the real term is constant in G);
// critic loss adds the penalty computed on the same step's interpolates.
template <typename T>
LossPair<T> wgan_gp_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake,
                           const Tensor<T>& penalty) {
  LossPair<T> base = wgan_losses(d_real, d_fake);
  return {base.g_loss, add(base.d_loss, penalty)};
}

}  // namespace bingan

#endif  // BINGAN_OBJECTIVES_HPP_
