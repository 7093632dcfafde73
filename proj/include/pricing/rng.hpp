#pragma once

#include <cstdint>

namespace pricing {

// Counter-based stream: every draw is a pure function of (seed, stream, counter),
// so substreams can be handed to parallel workers and replay identically
// regardless of thread count.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() { return mix(seed_, stream_, counter_++); }

  // uniform in [0,1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // derived stream, independent of draws made on this one
  RngStream substream(std::uint64_t idx) const {
    return RngStream(mix(seed_, stream_, 0x9e3779b97f4a7c15ull ^ idx), idx);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    // splitmix64 finalizer over a keyed combination
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1) + c * 0xbf58476d1ce4e5b9ull;
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace pricing
