#ifndef BINGAN_IMAGE_HPP_
#define BINGAN_IMAGE_HPP_

// Grayscale PNG output and the tiled sample grids.

#include <cstdint>
#include <string>
#include <vector>

#include "bingan/tensor.hpp"

namespace bingan {

void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels);

// Reads back an 8-bit grayscale PNG written by write_png_gray8.
std::vector<std::uint8_t> read_png_gray8(const std::string& path, int& width, int& height);

struct GridLayout {
  int tiles_per_side = 8;
  int tile = 28;
  int gutter = 2;
  int canvas() const { return tiles_per_side * tile + (tiles_per_side + 1) * gutter; }
};

// Tiles a perfect-square count of 28x28 images (values in [0,1], 0 maps to
// black and 1 to white) onto a white-guttered canvas.
std::vector<std::uint8_t> render_sample_grid(const Tensor<float>& images, GridLayout& layout_out);

// Renders and writes the grid in one go.
void emit_sample_grid(const Tensor<float>& images, const std::string& path);

}  // namespace bingan

#endif  // BINGAN_IMAGE_HPP_
