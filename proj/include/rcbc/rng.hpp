#pragma once

#include <cstdint>
#include <string_view>

namespace rcbc {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so parallel consumers stay reproducible
// no matter how work is interleaved.
class Rng {
 public:
  Rng() = default;
  Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

  // Derive an independent stream, e.g. one per Monte Carlo run.
  Rng substream(uint64_t id) const {
    return Rng(seed_, mix(stream_ ^ mix(id ^ 0x7f4a7c15ULL)));
  }

  uint64_t next_u64() { return at(counter_++); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi].
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  uint64_t seed() const { return seed_; }

  static uint64_t stream_id(std::string_view name) {
    // FNV-1a
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  uint64_t at(uint64_t counter) const {
    return mix(seed_ + 0x9e3779b97f4a7c15ULL * (counter + 1) + mix(stream_));
  }

  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t seed_ = 0;
  uint64_t stream_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace rcbc
