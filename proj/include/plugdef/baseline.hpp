#pragma once
// Training-free defense baselines: random resize-and-pad and Gaussian noise
// injection. Pure pixel transforms, no trainable state.
#include <cstdint>
#include <string>
#include <vector>

#include "plugdef/defense.hpp"
#include "plugdef/rng.hpp"

namespace plugdef::baseline {

struct RpConfig {
  int s_min = 0, s_max = 0; // 0,0 -> [ceil(0.85*H), H]
  enum class Interp { Nearest, Bilinear } interp = Interp::Bilinear;
};

// Resize to a uniformly drawn s x s, then zero-pad back to H x W at a
// uniformly drawn top-left offset.
std::vector<float> rp_defense(const float* x, int c, int h, int w, const RpConfig& cfg, Rng& rng);

// clip01(x + n), n ~ N(0, stddev^2) elementwise.
std::vector<float> gaussian_noise_defense(const float* x, std::size_t n, double stddev, Rng& rng);

// PixelDefense adapters; fresh per-example streams from (seed, index).
class RpDefense final : public PixelDefense {
 public:
  RpDefense(RpConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {}
  std::vector<float> apply(const float* x, int c, int h, int w, std::size_t index) const override {
    Rng rng = Rng::from(seed_, "rp." + std::to_string(index));
    return rp_defense(x, c, h, w, cfg_, rng);
  }

 private:
  RpConfig cfg_;
  std::uint64_t seed_;
};

class NoiseDefense final : public PixelDefense {
 public:
  NoiseDefense(double stddev, std::uint64_t seed) : stddev_(stddev), seed_(seed) {}
  std::vector<float> apply(const float* x, int c, int h, int w, std::size_t index) const override {
    Rng rng = Rng::from(seed_, "noise." + std::to_string(index));
    return gaussian_noise_defense(x, std::size_t(c) * h * w, stddev_, rng);
  }

 private:
  double stddev_;
  std::uint64_t seed_;
};

} // namespace plugdef::baseline
