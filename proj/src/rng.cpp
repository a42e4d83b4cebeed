#include "tnp/rng.hpp"

namespace tnp {

StreamRng::StreamRng(std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (std::uint64_t word : key) h = mix64(h ^ mix64(word));
  key_ = h;
}

} // namespace tnp
