#ifndef BINGAN_TESTS_ORACLES_HPP_
#define BINGAN_TESTS_ORACLES_HPP_

// Independent reference computations used as test oracles. Everything here is
// deliberately the dumbest possible implementation (central differences,
// nested loops, direct formulas) and never calls back into the code paths it
// is checking.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bingan/tensor.hpp"

namespace oracles {

// Central finite differences of a scalar function w.r.t. one leaf tensor.
// Evaluates f twice per coordinate with the leaf perturbed in place.
template <typename F>
std::vector<double> numeric_gradient(bingan::Tensor<double>& leaf, F&& f, double h = 1e-5) {
  std::vector<double> grad(static_cast<std::size_t>(leaf.numel()));
  double* p = leaf.mutable_data();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double keep = p[i];
    p[i] = keep + h;
    double up = f();
    p[i] = keep - h;
    double down = f();
    p[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double rel_error(double got, double want) {
  double denom = std::max(1.0, std::abs(want));
  return std::abs(got - want) / denom;
}

// Brute-force cross-correlation, NCHW data with [Co, Ci, kh, kw] kernels.
inline std::vector<double> conv2d_brute(const std::vector<double>& x, int n, int ci, int h, int w,
                                        const std::vector<double>& k, int co, int kh, int kw,
                                        int sh, int sw, int pt, int pl, int ho, int wo) {
  std::vector<double> out(static_cast<std::size_t>(n) * co * ho * wo, 0.0);
  for (int b = 0; b < n; ++b)
    for (int oc = 0; oc < co; ++oc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
          for (int ic = 0; ic < ci; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                int iy = oy * sh + ky - pt;
                int ix = ox * sw + kx - pl;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                out[((static_cast<std::size_t>(b) * co + oc) * ho + oy) * wo + ox] +=
                    x[((static_cast<std::size_t>(b) * ci + ic) * h + iy) * w + ix] *
                    k[((static_cast<std::size_t>(oc) * ci + ic) * kh + ky) * kw + kx];
              }
  return out;
}

// Brute-force transposed convolution (valid), scatter form.
inline std::vector<double> transconv2d_brute(const std::vector<double>& x, int n, int ci, int h,
                                             int w, const std::vector<double>& k, int co, int kh,
                                             int kw, int sh, int sw) {
  int ho = (h - 1) * sh + kh;
  int wo = (w - 1) * sw + kw;
  std::vector<double> out(static_cast<std::size_t>(n) * co * ho * wo, 0.0);
  for (int b = 0; b < n; ++b)
    for (int ic = 0; ic < ci; ++ic)
      for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix)
          for (int oc = 0; oc < co; ++oc)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx)
                out[((static_cast<std::size_t>(b) * co + oc) * ho + iy * sh + ky) * wo + ix * sw + kx] +=
                    x[((static_cast<std::size_t>(b) * ci + ic) * h + iy) * w + ix] *
                    k[((static_cast<std::size_t>(oc) * ci + ic) * kh + ky) * kw + kx];
  return out;
}

// One-sided binomial three-sigma band around probability p for m draws.
inline double binomial_3sigma(double p, double m) { return 3.0 * std::sqrt(p * (1.0 - p) / m); }

// Kolmogorov-Smirnov p-value of samples against U[0,1] (asymptotic series).
inline double ks_uniform_pvalue(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double cdf = samples[i];
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(cdf - lo), std::abs(cdf - hi)));
  }
  double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j)
    sum += (j % 2 ? 1.0 : -1.0) * std::exp(-2.0 * j * j * t * t);
  double p = 2.0 * sum;
  return std::min(1.0, std::max(0.0, p));
}

// Scalar Adam reference, one step from fresh state.
inline double adam_first_step(double param, double g, double alpha, double beta1, double beta2,
                              double eps) {
  double m = (1 - beta1) * g;
  double v = (1 - beta2) * g * g;
  double mhat = m / (1 - beta1);
  double vhat = v / (1 - beta2);
  return param - alpha * mhat / (std::sqrt(vhat) + eps);
}

// Scalar RMSProp reference, one step from fresh state.
inline double rmsprop_first_step(double param, double g, double lr, double rho, double eps) {
  double acc = (1 - rho) * g * g;
  return param - lr * g / (std::sqrt(acc) + eps);
}

// Pearson correlation.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da == 0 || db == 0) return 0.0;
  return num / std::sqrt(da * db);
}

}  // namespace oracles

#endif  // BINGAN_TESTS_ORACLES_HPP_
