#ifndef BINGAN_TESTS_FIXTURES_HPP_
#define BINGAN_TESTS_FIXTURES_HPP_

// Deterministic synthetic digit-like images. A 7x5 bitmap font is upscaled
// into 28x28 rasters with per-image jitter, giving the desk-scale training
// runs a dataset with real spatial structure without shipping MNIST files.

#include <array>
#include <cstdint>
#include <string>

#include "bingan/mnist.hpp"
#include "bingan/rng.hpp"

namespace fixtures {

inline const std::array<std::array<std::uint8_t, 7>, 10>& glyphs() {
  // one byte per row, low 5 bits used
  static const std::array<std::array<std::uint8_t, 7>, 10> g = {{
      {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e},  // 0
      {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},  // 1
      {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f},  // 2
      {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},  // 3
      {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02},  // 4
      {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},  // 5
      {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e},  // 6
      {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
      {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e},  // 8
      {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c},  // 9
  }};
  return g;
}

inline bingan::RawImages synthetic_digits(int count, std::uint64_t seed) {
  bingan::RawImages out;
  out.count = count;
  out.rows = 28;
  out.cols = 28;
  out.pixels.assign(static_cast<std::size_t>(count) * 784, 0);
  bingan::RngStream rng(seed);
  for (int i = 0; i < count; ++i) {
    const auto& glyph = glyphs()[static_cast<std::size_t>(i % 10)];
    int scale = 3;
    int ox = 6 + static_cast<int>(rng.below(5));  // glyph is 15 wide scaled
    int oy = 3 + static_cast<int>(rng.below(4));  // and 21 tall
    std::uint8_t* img = out.pixels.data() + static_cast<std::size_t>(i) * 784;
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 5; ++c) {
        if (!(glyph[static_cast<std::size_t>(r)] >> (4 - c) & 1)) continue;
        for (int dy = 0; dy < scale; ++dy)
          for (int dx = 0; dx < scale; ++dx) {
            int y = oy + r * scale + dy, x = ox + c * scale + dx;
            if (y >= 0 && y < 28 && x >= 0 && x < 28)
              img[y * 28 + x] = static_cast<std::uint8_t>(128 + rng.below(128));
          }
      }
    // sparse speckle noise
    for (int k = 0; k < 4; ++k)
      img[rng.below(784)] = static_cast<std::uint8_t>(rng.below(256));
  }
  return out;
}

inline std::string write_synthetic_idx(const std::string& path, int count, std::uint64_t seed) {
  bingan::write_idx(path, synthetic_digits(count, seed));
  return path;
}

}  // namespace fixtures

#endif  // BINGAN_TESTS_FIXTURES_HPP_
