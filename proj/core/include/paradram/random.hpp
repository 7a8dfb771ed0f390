#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace paradram {

/// Seeded pseudo-random stream owned by exactly one worker at a time.
///
/// Uniform and normal variates are derived from the raw engine output by
/// fixed formulas (no cached variates), so the engine state alone determines
/// every future draw. That is what makes restart snapshots exact.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for multi-chain index `chain` (0-based).
  static RandomStream for_chain(std::uint64_t seed, std::uint64_t chain);

  /// Stream for one (round, rank) cell of the fork-join protocol; rank is 1-based.
  static RandomStream for_round(std::uint64_t seed, std::uint64_t round, std::uint32_t rank);

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() noexcept;

  void fill_normal(std::span<double> out) noexcept {
    for (auto& z : out) z = normal();
  }

  std::string serialize() const;
  static RandomStream deserialize(std::string_view state);

  friend bool operator==(const RandomStream& a, const RandomStream& b) { return a.engine_ == b.engine_; }

 private:
  RandomStream() = default;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive well-separated seeds from small integers.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace paradram
