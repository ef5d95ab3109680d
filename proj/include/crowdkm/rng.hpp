#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "crowdkm/digest.hpp"

namespace crowdkm {

// splitmix64: the stream derivation function. Deterministic on every
// platform; std:: distributions are implementation-defined so all draws
// below are hand-rolled.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Per-entity random stream. Seeding mixes a run seed with a string key so
// each agent draws from an independent stream: adding or reconfiguring one
// agent never perturbs another's values.
class Rng {
 public:
  Rng() : state_(0) {}
  Rng(std::uint64_t seed, std::string_view key) {
    state_ = seed ^ 0x6a09e667f3bcc908ULL;
    state_ ^= fnv1a64(key);
    // A few warm-up rounds decorrelate nearby seeds.
    for (int i = 0; i < 4; ++i) splitmix64(state_);
  }

  // Optional draw log for stream-independence checks.
  void record_into(std::vector<std::uint64_t>* sink) { recorder_ = sink; }

  std::uint64_t next_u64() {
    std::uint64_t value = splitmix64(state_);
    if (recorder_) recorder_->push_back(value);
    return value;
  }

  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      std::uint64_t value = next_u64();
      if (value >= threshold) return value % bound;
    }
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool chance(double probability) {
    if (probability <= 0.0) return false;
    if (probability >= 1.0) return true;
    return uniform() < probability;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_;
  std::vector<std::uint64_t>* recorder_ = nullptr;
};

}  // namespace crowdkm
