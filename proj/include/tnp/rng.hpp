#pragma once

// Counter-based random streams. A stream is a pure function of its key words,
// so draws do not depend on how work is scheduled across threads.

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace tnp {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream keyed by an ordered tuple of words. Satisfies UniformRandomBitGenerator.
class StreamRng {
public:
  using result_type = std::uint64_t;

  StreamRng(std::initializer_list<std::uint64_t> key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Domain tags so unrelated streams never share a key.
enum class StreamTag : std::uint64_t {
  trajectory = 1,
  source = 2,
  bootstrap = 3,
  initial = 4,
};

} // namespace tnp
