#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dcm {

// xoshiro256++ with splitmix64 seeding. The generator is fully specified here
// so that seeded streams are reproducible across compilers and platforms;
// nothing in the library draws from std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : root_seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached spare, stateless sequence).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1u;
    const auto wide = static_cast<unsigned __int128>(next_u64()) * range;
    return lo + static_cast<std::int64_t>(wide >> 64);
  }

  std::uint64_t root_seed() const { return root_seed_; }

  // Derived stream: child_seed = fnv1a64(master seed LE bytes, purpose bytes,
  // index LE bytes). Independent of how much the parent stream was consumed.
  Rng substream(std::string_view purpose, std::uint64_t index = 0) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_byte = [&h](std::uint8_t b) {
      h ^= b;
      h *= 0x100000001b3ull;
    };
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(root_seed_ >> (8 * i)));
    for (char c : purpose) mix_byte(static_cast<std::uint8_t>(c));
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(index >> (8 * i)));
    return Rng(h);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4];
  std::uint64_t root_seed_;
};

}  // namespace dcm
