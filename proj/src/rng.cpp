#include "outlierlab/rng.hpp"

namespace outlierlab {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t n, std::uint64_t trial,
                          std::string_view purpose) {
  // FNV-1a over the tag, then chained splitmix.
  std::uint64_t tag = 0xcbf29ce484222325ULL;
  for (unsigned char c : purpose) {
    tag ^= c;
    tag *= 0x100000001b3ULL;
  }
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ n);
  h = splitmix64(h ^ trial);
  return splitmix64(h ^ tag);
}

}  // namespace outlierlab
