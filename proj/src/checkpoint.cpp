#include "bingan/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bingan {

namespace {

std::string shape_token(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape_token(const std::string& token) {
  Shape s;
  std::size_t at = 0;
  while (at < token.size()) {
    std::size_t next = token.find('x', at);
    if (next == std::string::npos) next = token.size();
    s.push_back(std::stoi(token.substr(at, next - at)));
    at = next + 1;
  }
  return s;
}

void put_f32_le(float v, std::vector<std::uint8_t>& out) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<std::uint8_t>(bits));
  out.push_back(static_cast<std::uint8_t>(bits >> 8));
  out.push_back(static_cast<std::uint8_t>(bits >> 16));
  out.push_back(static_cast<std::uint8_t>(bits >> 24));
}

float get_f32_le(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

const std::string& CheckpointData::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  throw IoError("checkpoint: missing meta key '" + key + "'");
}

bool CheckpointData::has_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return true;
  return false;
}

double CheckpointData::scalar_value(const std::string& key) const {
  for (const auto& [k, v] : scalars)
    if (k == key) return v;
  throw IoError("checkpoint: missing scalar '" + key + "'");
}

std::uint64_t CheckpointData::rng_state(const std::string& key) const {
  for (const auto& [k, v] : rng_states)
    if (k == key) return v;
  throw IoError("checkpoint: missing rng stream '" + key + "'");
}

const Tensor<float>& CheckpointData::tensor_named(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw IoError("checkpoint: missing tensor '" + name + "'");
}

void save_checkpoint(const std::string& stem, const CheckpointData& data) {
  std::ofstream manifest(stem + ".manifest");
  if (!manifest) throw IoError("checkpoint: cannot write " + stem + ".manifest");
  manifest << "bingan-checkpoint 1\n";
  char buf[64];
  for (const auto& [k, v] : data.meta) manifest << "meta " << k << ' ' << v << '\n';
  for (const auto& [k, v] : data.rng_states) manifest << "rng " << k << ' ' << v << '\n';
  for (const auto& [k, v] : data.scalars) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    manifest << "scalar " << k << ' ' << buf << '\n';
  }
  std::vector<std::uint8_t> blob;
  for (const auto& t : data.tensors) {
    manifest << "tensor " << t.name << ' ' << shape_token(t.tensor.shape()) << '\n';
    for (std::int64_t i = 0; i < t.tensor.numel(); ++i) put_f32_le(t.tensor.at(i), blob);
  }
  if (!manifest) throw IoError("checkpoint: short write to " + stem + ".manifest");
  manifest.close();

  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw IoError("checkpoint: cannot write " + stem + ".bin");
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!bin) throw IoError("checkpoint: short write to " + stem + ".bin");
}

CheckpointData load_checkpoint(const std::string& stem) {
  std::ifstream manifest(stem + ".manifest");
  if (!manifest) throw IoError("checkpoint: cannot open " + stem + ".manifest");
  std::string header;
  std::getline(manifest, header);
  if (header != "bingan-checkpoint 1")
    throw IoError("checkpoint: unrecognized manifest header in " + stem + ".manifest");

  CheckpointData data;
  struct PendingTensor {
    std::string name;
    Shape shape;
  };
  std::vector<PendingTensor> pending;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string kind, key;
    in >> kind >> key;
    if (kind == "meta") {
      std::string value;
      std::getline(in, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      data.meta.emplace_back(key, value);
    } else if (kind == "rng") {
      std::uint64_t v;
      in >> v;
      data.rng_states.emplace_back(key, v);
    } else if (kind == "scalar") {
      double v;
      in >> v;
      data.scalars.emplace_back(key, v);
    } else if (kind == "tensor") {
      std::string shape;
      in >> shape;
      pending.push_back({key, parse_shape_token(shape)});
    } else {
      throw IoError("checkpoint: unknown manifest entry '" + kind + "'");
    }
  }

  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw IoError("checkpoint: cannot open " + stem + ".bin");
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(bin)),
                                 std::istreambuf_iterator<char>());
  std::size_t want = 0;
  for (const auto& p : pending) want += static_cast<std::size_t>(shape_numel(p.shape)) * 4;
  if (blob.size() != want)
    throw IoError("checkpoint: " + stem + ".bin holds " + std::to_string(blob.size()) +
                  " bytes, manifest requires " + std::to_string(want));

  std::size_t at = 0;
  for (const auto& p : pending) {
    std::size_t count = static_cast<std::size_t>(shape_numel(p.shape));
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i, at += 4) values[i] = get_f32_le(blob.data() + at);
    data.tensors.push_back({p.name, Tensor<float>::from(p.shape, std::move(values))});
  }
  return data;
}

}  // namespace bingan
