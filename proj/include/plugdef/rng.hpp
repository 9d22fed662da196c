#pragma once
// Reproducible PRNG built on SplitMix64 (Steele, Lea, Flood: "Fast
// splittable pseudorandom number generators", OOPSLA 2014). The state walks
// a Weyl sequence and each output is a finalizing hash of the state, so the
// stream is a pure function of the seed. Purpose-tagged child streams are
// derived by hashing the parent state with the tag (FNV-1a), which keeps
// init / sampling / attack noise / baseline noise decorrelated.
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace plugdef {

std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t basis = 0xcbf29ce484222325ull);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // One seed plus a purpose tag, e.g. Rng::from(42, "fixed-test-subset").
  static Rng from(std::uint64_t seed, std::string_view purpose);

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Unbiased draw in [0, bound) by rejection below 2^64 mod bound.
  std::uint64_t below(std::uint64_t bound);

  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; } // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  float uniformf() { return float(next_u64() >> 40) * 0x1.0p-24f; }

  double normal(); // Box-Muller; pairs cached

  // Pure: does not advance this stream.
  Rng split(std::string_view tag) const;

  // Fisher-Yates, iterating from the back.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

} // namespace plugdef
