#ifndef BINGAN_UTIL_HPP_
#define BINGAN_UTIL_HPP_

#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bingan {

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << 'x';
    out << s[i];
  }
  out << ']';
  return out.str();
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

[[noreturn]] inline void fail_op(const std::string& op, const std::string& msg) {
  throw TensorError("op '" + op + "': " + msg);
}

// Splits [0, n) into contiguous chunks, one worker per chunk. Each output
// element is written by exactly one worker and every inner reduction keeps
// its sequential order, so results are bit-identical for any thread count.
template <typename Fn>
void parallel_for(std::int64_t n, std::int64_t grain, Fn&& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("BINGAN_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) hw = static_cast<unsigned>(v);
  }
  if (hw < 2 || n < 2 * grain) {
    fn(std::int64_t{0}, n);
    return;
  }
  std::int64_t chunks = std::min<std::int64_t>(hw, (n + grain - 1) / grain);
  std::int64_t step = (n + chunks - 1) / chunks;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(chunks));
  for (std::int64_t c = 0; c < chunks; ++c) {
    std::int64_t lo = c * step;
    std::int64_t hi = std::min(n, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace bingan

#endif  // BINGAN_UTIL_HPP_
