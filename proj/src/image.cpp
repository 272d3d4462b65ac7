#include "bingan/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace bingan {

namespace {

void put_be32(std::uint32_t v, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_chunk(const char type[4], const std::vector<std::uint8_t>& payload,
               std::vector<std::uint8_t>& out) {
  put_be32(static_cast<std::uint32_t>(payload.size()), out);
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_be32(crc, out);
}

}  // namespace

void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
  if (static_cast<std::size_t>(width) * height != pixels.size())
    throw IoError("png: pixel buffer does not match " + std::to_string(width) + "x" +
                  std::to_string(height));

  // filter byte 0 per scanline
  std::vector<std::uint8_t> raw;
  raw.reserve(pixels.size() + static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), pixels.begin() + static_cast<std::size_t>(y) * width,
               pixels.begin() + static_cast<std::size_t>(y + 1) * width);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("png: deflate failed");
  idat.resize(bound);

  std::vector<std::uint8_t> file{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  put_be32(static_cast<std::uint32_t>(width), ihdr);
  put_be32(static_cast<std::uint32_t>(height), ihdr);
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk("IHDR", ihdr, file);
  put_chunk("IDAT", idat, file);
  put_chunk("IEND", {}, file);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("png: cannot write " + path);
  out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!out) throw IoError("png: short write to " + path);
}

std::vector<std::uint8_t> read_png_gray8(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("png: cannot open " + path);
  std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
    throw IoError("png: bad signature in " + path);

  width = height = 0;
  std::vector<std::uint8_t> idat;
  std::size_t at = 8;
  while (at + 8 <= file.size()) {
    std::uint32_t len = get_be32(file.data() + at);
    std::string type(reinterpret_cast<const char*>(file.data() + at + 4), 4);
    const std::uint8_t* payload = file.data() + at + 8;
    if (at + 12 + len > file.size()) throw IoError("png: truncated chunk in " + path);
    if (type == "IHDR") {
      width = static_cast<int>(get_be32(payload));
      height = static_cast<int>(get_be32(payload + 4));
      if (payload[8] != 8 || payload[9] != 0)
        throw IoError("png: only 8-bit grayscale is supported");
    } else if (type == "IDAT") {
      idat.insert(idat.end(), payload, payload + len);
    } else if (type == "IEND") {
      break;
    }
    at += 12 + len;
  }
  if (width <= 0 || height <= 0) throw IoError("png: missing IHDR in " + path);

  uLongf raw_len = static_cast<uLongf>((static_cast<std::size_t>(width) + 1) * height);
  std::vector<std::uint8_t> raw(raw_len);
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw IoError("png: inflate failed for " + path);

  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (width + 1);
    if (row[0] != 0) throw IoError("png: unsupported filter type in " + path);
    std::memcpy(pixels.data() + static_cast<std::size_t>(y) * width, row + 1,
                static_cast<std::size_t>(width));
  }
  return pixels;
}

std::vector<std::uint8_t> render_sample_grid(const Tensor<float>& images, GridLayout& layout) {
  int count = images.dim(0);
  if (images.numel() != static_cast<std::int64_t>(count) * 784)
    throw IoError("grid: images must be 28x28, got " + shape_str(images.shape()));
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  if (side * side != count)
    throw IoError("grid: image count " + std::to_string(count) + " is not a perfect square");
  layout.tiles_per_side = side;
  layout.tile = 28;
  layout.gutter = 2;
  int canvas = layout.canvas();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(canvas) * canvas, 255);  // white gutters
  for (int t = 0; t < count; ++t) {
    int ty = t / side, tx = t % side;
    int oy = layout.gutter + ty * (layout.tile + layout.gutter);
    int ox = layout.gutter + tx * (layout.tile + layout.gutter);
    const float* img = images.data() + static_cast<std::size_t>(t) * 784;
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x) {
        float v = img[y * 28 + x];
        double clamped = v < 0.f ? 0.0 : (v > 1.f ? 1.0 : static_cast<double>(v));
        out[static_cast<std::size_t>(oy + y) * canvas + ox + x] =
            static_cast<std::uint8_t>(std::lround(clamped * 255.0));
      }
  }
  return out;
}

void emit_sample_grid(const Tensor<float>& images, const std::string& path) {
  GridLayout layout;
  auto pixels = render_sample_grid(images, layout);
  write_png_gray8(path, layout.canvas(), layout.canvas(), pixels);
}

}  // namespace bingan
