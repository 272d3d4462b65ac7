#ifndef BINGAN_MNIST_HPP_
#define BINGAN_MNIST_HPP_

// IDX ingestion, pixel binarization and shuffled mini-batch serving.

#include <cstdint>
#include <string>
#include <vector>

#include "bingan/rng.hpp"
#include "bingan/tensor.hpp"

namespace bingan {

struct RawImages {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols intensities
};

// Parses an IDX byte stream (big-endian, magic 0x0000.08.<ndims>). Gzip input
// is detected by its 0x1f 0x8b magic and inflated first.
RawImages parse_idx_bytes(const std::uint8_t* data, std::size_t size);
RawImages parse_idx(const std::string& path);

// Writes images back out in IDX layout (fixtures and synthetic datasets).
void write_idx(const std::string& path, const RawImages& images);

// Pixels exactly 0 or 1, images exactly 28x28.
struct BinarizedDataset {
  int count = 0;
  std::vector<float> images;  // count * 784
};

// Nonzero intensities map to one, zero stays zero.
BinarizedDataset binarize(const RawImages& raw);

// Serves shuffled batches of a fixed size; the short final batch is dropped
// so batch statistics stay well defined. Each epoch visits every index of the
// truncated set exactly once and reshuffles at the boundary.
class BatchIterator {
 public:
  BatchIterator(const BinarizedDataset& data, int batch_size, bool image_layout, RngStream shuffle);

  Tensor<float> next_batch();
  int epoch() const { return epoch_; }
  int batches_per_epoch() const { return static_cast<int>(order_.size()) / batch_; }
  int batch_size() const { return batch_; }
  RngStream& shuffle_stream() { return shuffle_; }
  // Multiset of indices served so far in the current epoch (testing hook).
  const std::vector<int>& current_order() const { return order_; }

  // Exact-position serialization: the stream state captured just before the
  // latest reshuffle plus the cursor reproduce the current permutation and
  // position, so resumed training serves the identical batch sequence.
  std::uint64_t state_before_shuffle() const { return state_before_shuffle_; }
  int cursor() const { return cursor_; }
  void restore_position(std::uint64_t pre_shuffle_state, int cursor) {
    shuffle_.set_state(pre_shuffle_state);
    reshuffle();
    cursor_ = cursor;
  }

 private:
  void reshuffle();

  const BinarizedDataset& data_;
  int batch_;
  bool image_layout_;
  RngStream shuffle_;
  std::vector<int> order_;
  int cursor_ = 0;
  int epoch_ = 0;
  std::uint64_t state_before_shuffle_ = 0;
};

}  // namespace bingan

#endif  // BINGAN_MNIST_HPP_
