#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rbslam {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Counter-based seed derivation. A `SeedStream` names a position in a tree of
/// random substreams; the generator for a leaf depends only on the path of
/// counters, never on the order in which leaves are visited. This is what makes
/// serial and parallel runs bit-identical.
class SeedStream {
 public:
  constexpr explicit SeedStream(std::uint64_t seed) : key_(detail::splitmix64(seed)) {}

  constexpr SeedStream child(std::uint64_t counter) const {
    return SeedStream(Raw{}, detail::splitmix64(key_ ^ detail::splitmix64(counter + 0x632be59bd9b4e019ULL)));
  }
  constexpr SeedStream child(std::initializer_list<std::uint64_t> counters) const {
    SeedStream s = *this;
    for (auto c : counters) s = s.child(c);
    return s;
  }

  constexpr std::uint64_t key() const { return key_; }
  Rng engine() const { return Rng(key_); }

 private:
  struct Raw {};
  constexpr SeedStream(Raw, std::uint64_t key) : key_(key) {}
  std::uint64_t key_;
};

/// Domain-separation tags for the substreams used by the filters.
namespace stream_tag {
inline constexpr std::uint64_t kPropagate = 1;
inline constexpr std::uint64_t kResample = 2;
inline constexpr std::uint64_t kAncestor = 3;
inline constexpr std::uint64_t kFinalDraw = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kSimulation = 6;
}  // namespace stream_tag

}  // namespace rbslam
