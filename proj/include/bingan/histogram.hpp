#ifndef BINGAN_HISTOGRAM_HPP_
#define BINGAN_HISTOGRAM_HPP_

// 100-bin histogram of preactivated outputs over [0,1]. The last bin is
// right-closed so the interval is covered exactly; float32 saturation can
// legitimately produce the endpoint values 0.0 and 1.0, anything outside
// [0,1] violates the preactivation contract and is an error.

#include <array>
#include <cstdint>
#include <fstream>
#include <string>

#include "bingan/tensor.hpp"

namespace bingan {

struct Histogram {
  static constexpr int kBins = 100;
  std::array<std::uint64_t, kBins> counts{};
  std::uint64_t total = 0;

  void add(double v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw TensorError("histogram: preactivation " + std::to_string(v) + " outside [0,1]");
    int bin = static_cast<int>(v * kBins);
    if (bin >= kBins) bin = kBins - 1;
    ++counts[static_cast<std::size_t>(bin)];
    ++total;
  }

  double bin_low(int i) const { return static_cast<double>(i) / kBins; }
  double bin_high(int i) const { return static_cast<double>(i + 1) / kBins; }
};

template <typename T>
Histogram compute_preactivation_histogram(const Tensor<T>& records) {
  if (!records.defined() || records.numel() == 0)
    throw TensorError("histogram: no preactivation records");
  Histogram h;
  for (std::int64_t i = 0; i < records.numel(); ++i) h.add(static_cast<double>(records.at(i)));
  return h;
}

inline void write_histogram_csv(const Histogram& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("histogram: cannot write " + path);
  out << "bin_low,bin_high,count\n";
  char buf[64];
  for (int i = 0; i < Histogram::kBins; ++i) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f,", h.bin_low(i), h.bin_high(i));
    out << buf << h.counts[static_cast<std::size_t>(i)] << "\n";
  }
}

}  // namespace bingan

#endif  // BINGAN_HISTOGRAM_HPP_
