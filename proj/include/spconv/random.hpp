#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace spconv {

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed of a named substream. Streams with different names, or different
/// indices within one name, are decorrelated; the mapping is a pure function,
/// so draws can be evaluated in any order.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::string_view stream,
                                       std::uint64_t index = 0, std::uint64_t sub = 0) {
  std::uint64_t h = detail::splitmix64(seed ^ detail::fnv1a(stream));
  h = detail::splitmix64(h ^ index);
  return detail::splitmix64(h ^ (sub * 0xd1b54a32d192ed03ULL));
}

inline Engine substream(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0,
                        std::uint64_t sub = 0) {
  return Engine(substream_seed(seed, stream, index, sub));
}

}  // namespace spconv
