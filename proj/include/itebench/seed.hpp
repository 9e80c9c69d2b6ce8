#pragma once

#include <concepts>
#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>

namespace itebench {

using Rng = std::mt19937_64;

/// Hierarchical seed. Children are derived from the parent value and a tag,
/// never from generator state, so a sub-stream does not depend on how much
/// randomness sibling streams consumed.
class Seed {
 public:
  constexpr Seed() = default;
  constexpr explicit Seed(std::uint64_t value) : value_(value) {}

  constexpr std::uint64_t value() const { return value_; }

  template <std::integral T>
  constexpr Seed child(T tag) const {
    return mixed(static_cast<std::uint64_t>(tag));
  }

  constexpr Seed mixed(std::uint64_t tag) const {
    return Seed(mix(value_ ^ mix(tag + 0x9e3779b97f4a7c15ULL)));
  }

  constexpr Seed child(std::string_view tag) const {
    // FNV-1a over the tag bytes.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return mixed(h);
  }

  Seed child_real(double tag) const {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &tag, sizeof bits);
    return mixed(bits);
  }

  Rng engine() const { return Rng(value_); }

  friend constexpr bool operator==(Seed, Seed) = default;

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t value_ = 0;
};

}  // namespace itebench
