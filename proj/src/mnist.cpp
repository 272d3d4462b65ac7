#include "bingan/mnist.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace bingan {

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void write_be32(std::uint32_t v, std::uint8_t* p) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

std::vector<std::uint8_t> gunzip(const std::uint8_t* data, std::size_t size) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("idx: zlib init failed");
  std::vector<std::uint8_t> out;
  out.reserve(size * 4);
  std::uint8_t buf[1 << 16];
  zs.next_in = const_cast<std::uint8_t*>(data);
  zs.avail_in = static_cast<uInt>(size);
  int ret = Z_OK;
  while (ret != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("idx: corrupt gzip stream");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace

RawImages parse_idx_bytes(const std::uint8_t* data, std::size_t size) {
  if (size >= 2 && data[0] == 0x1f && data[1] == 0x8b) {
    std::vector<std::uint8_t> inflated = gunzip(data, size);
    return parse_idx_bytes(inflated.data(), inflated.size());
  }
  if (size < 4) throw IoError("idx: stream shorter than the magic number");
  if (data[0] != 0 || data[1] != 0 || data[2] != 0x08)
    throw IoError("idx: bad magic, expected unsigned-byte IDX (0x00000803 for images)");
  int ndims = data[3];
  if (ndims < 1 || ndims > 3) throw IoError("idx: unsupported dimension count " + std::to_string(ndims));
  std::size_t header = 4 + 4 * static_cast<std::size_t>(ndims);
  if (size < header) throw IoError("idx: truncated header");

  RawImages out;
  out.count = static_cast<int>(read_be32(data + 4));
  out.rows = ndims >= 2 ? static_cast<int>(read_be32(data + 8)) : 1;
  out.cols = ndims >= 3 ? static_cast<int>(read_be32(data + 12)) : 1;
  if (out.count < 0 || out.rows <= 0 || out.cols <= 0) throw IoError("idx: nonsensical dimensions");

  std::size_t want = static_cast<std::size_t>(out.count) * out.rows * out.cols;
  std::size_t have = size - header;
  if (have != want)
    throw IoError("idx: payload holds " + std::to_string(have) + " bytes, dimensions require " +
                  std::to_string(want));
  out.pixels.assign(data + header, data + size);
  return out;
}

RawImages parse_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("idx: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_idx_bytes(bytes.data(), bytes.size());
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path + ")");
  }
}

void write_idx(const std::string& path, const RawImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("idx: cannot write " + path);
  std::uint8_t header[16] = {0, 0, 0x08, 3};
  write_be32(static_cast<std::uint32_t>(images.count), header + 4);
  write_be32(static_cast<std::uint32_t>(images.rows), header + 8);
  write_be32(static_cast<std::uint32_t>(images.cols), header + 12);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
  if (!out) throw IoError("idx: short write to " + path);
}

BinarizedDataset binarize(const RawImages& raw) {
  if (raw.rows != 28 || raw.cols != 28)
    throw IoError("binarize: expected 28x28 images, got " + std::to_string(raw.rows) + "x" +
                  std::to_string(raw.cols));
  BinarizedDataset out;
  out.count = raw.count;
  out.images.resize(raw.pixels.size());
  for (std::size_t i = 0; i < raw.pixels.size(); ++i)
    out.images[i] = raw.pixels[i] > 0 ? 1.0f : 0.0f;
  return out;
}

BatchIterator::BatchIterator(const BinarizedDataset& data, int batch_size, bool image_layout,
                             RngStream shuffle)
    : data_(data), batch_(batch_size), image_layout_(image_layout), shuffle_(shuffle) {
  if (data.count <= 0) throw IoError("batch iterator: empty dataset");
  if (batch_size < 2) throw IoError("batch iterator: batch size must be at least 2");
  if (data.count < batch_size)
    throw IoError("batch iterator: dataset of " + std::to_string(data.count) +
                  " cannot fill a batch of " + std::to_string(batch_size));
  int usable = (data.count / batch_size) * batch_size;
  order_.resize(static_cast<std::size_t>(data.count));
  for (int i = 0; i < data.count; ++i) order_[static_cast<std::size_t>(i)] = i;
  (void)usable;
  reshuffle();
}

void BatchIterator::reshuffle() {
  state_before_shuffle_ = shuffle_.state();
  // Fisher-Yates over all indices; only the first floor(N/B)*B get served.
  for (int i = static_cast<int>(order_.size()) - 1; i > 0; --i) {
    int j = static_cast<int>(shuffle_.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order_[static_cast<std::size_t>(i)], order_[static_cast<std::size_t>(j)]);
  }
  cursor_ = 0;
}

Tensor<float> BatchIterator::next_batch() {
  int served = batches_per_epoch() * batch_;
  if (cursor_ + batch_ > served) {
    ++epoch_;
    reshuffle();
  }
  std::vector<float> v(static_cast<std::size_t>(batch_) * 784);
  for (int i = 0; i < batch_; ++i) {
    int idx = order_[static_cast<std::size_t>(cursor_ + i)];
    std::memcpy(v.data() + static_cast<std::size_t>(i) * 784,
                data_.images.data() + static_cast<std::size_t>(idx) * 784, 784 * sizeof(float));
  }
  cursor_ += batch_;
  if (image_layout_) return Tensor<float>::from({batch_, 1, 28, 28}, std::move(v));
  return Tensor<float>::from({batch_, 784}, std::move(v));
}

}  // namespace bingan
