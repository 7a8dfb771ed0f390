#include "paradram/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "paradram/error.hpp"

namespace paradram {

RandomStream RandomStream::for_chain(std::uint64_t seed, std::uint64_t chain) {
  return RandomStream(mix_seed(mix_seed(seed) ^ mix_seed(0xC4A17ULL + chain)));
}

RandomStream RandomStream::for_round(std::uint64_t seed, std::uint64_t round, std::uint32_t rank) {
  const std::uint64_t key = mix_seed(mix_seed(seed ^ 0x5eedF0C4ULL) + round);
  return RandomStream(mix_seed(key ^ (static_cast<std::uint64_t>(rank) << 32 | rank)));
}

double RandomStream::normal() noexcept {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string RandomStream::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

RandomStream RandomStream::deserialize(std::string_view state) {
  RandomStream stream;
  std::istringstream in{std::string(state)};
  in >> stream.engine_;
  if (!in) throw Error(ErrorCode::CorruptRestart, "unreadable generator state");
  return stream;
}

}  // namespace paradram
