#ifndef BINGAN_CHECKPOINT_HPP_
#define BINGAN_CHECKPOINT_HPP_

// Checkpoint format: a text manifest (<stem>.manifest) listing metadata, rng
// stream states, optimizer scalars and tensor names with shapes in
// serialization order, next to a flat binary file (<stem>.bin) of the tensor
// values as little-endian 32-bit floats in that same order.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bingan/layers.hpp"

namespace bingan {

struct CheckpointData {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, std::uint64_t>> rng_states;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<NamedTensor<float>> tensors;

  const std::string& meta_value(const std::string& key) const;
  bool has_meta(const std::string& key) const;
  double scalar_value(const std::string& key) const;
  std::uint64_t rng_state(const std::string& key) const;
  const Tensor<float>& tensor_named(const std::string& name) const;
};

void save_checkpoint(const std::string& stem, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& stem);

}  // namespace bingan

#endif  // BINGAN_CHECKPOINT_HPP_
