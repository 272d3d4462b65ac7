#ifndef BINGAN_RNG_HPP_
#define BINGAN_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <string>

namespace bingan {

// Counter-style splitmix64 stream. One master seed is split into independent
// named streams so toggling one consumer (say, Bernoulli draws) does not
// perturb the others. State is a single u64, which keeps checkpointed
// training trajectories exactly resumable.
class RngStream {
 public:
  RngStream() : state_(0x9e3779b97f4a7c15ull) {}
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t hash_name(const std::string& name) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  // Derives the named substream of a master seed.
  static RngStream derive(std::uint64_t master_seed, const std::string& name) {
    return RngStream(mix(master_seed ^ hash_name(name)));
  }

  RngStream derive(const std::string& name) const {
    return RngStream(mix(state_ ^ hash_name(name)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; draws two uniforms per call and keeps no pending state so the
  // stream stays resumable from the bare counter.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace bingan

#endif  // BINGAN_RNG_HPP_
