#include "plugdef/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plugdef::baseline {

namespace {

// dst grid s x s sampled from the h x w source
void resize_plane(const float* src, int h, int w, float* dst, int s, RpConfig::Interp interp) {
  if (interp == RpConfig::Interp::Nearest) {
    for (int y = 0; y < s; ++y) {
      const int sy = std::min(h - 1, int(double(y + 0.5) * h / s));
      for (int x = 0; x < s; ++x) {
        const int sx = std::min(w - 1, int(double(x + 0.5) * w / s));
        dst[std::size_t(y) * s + x] = src[std::size_t(sy) * w + sx];
      }
    }
    return;
  }
  // bilinear, corner-aligned so the full-size draw is the identity
  for (int y = 0; y < s; ++y) {
    const double fy = s > 1 ? double(y) * (h - 1) / (s - 1) : 0.0;
    const int y0 = std::min(h - 1, int(fy));
    const int y1 = std::min(h - 1, y0 + 1);
    const double wy = fy - y0;
    for (int x = 0; x < s; ++x) {
      const double fx = s > 1 ? double(x) * (w - 1) / (s - 1) : 0.0;
      const int x0 = std::min(w - 1, int(fx));
      const int x1 = std::min(w - 1, x0 + 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * src[std::size_t(y0) * w + x0] + wx * src[std::size_t(y0) * w + x1]) +
                       wy * ((1 - wx) * src[std::size_t(y1) * w + x0] + wx * src[std::size_t(y1) * w + x1]);
      dst[std::size_t(y) * s + x] = static_cast<float>(v);
    }
  }
}

} // namespace

std::vector<float> rp_defense(const float* x, int c, int h, int w, const RpConfig& cfg, Rng& rng) {
  int s_min = cfg.s_min > 0 ? cfg.s_min : static_cast<int>(std::ceil(0.85 * h));
  int s_max = cfg.s_max > 0 ? cfg.s_max : h;
  if (s_min > s_max || s_max > h || s_max > w)
    throw std::invalid_argument("rp_defense: require s_min <= s_max <= min(H,W)");
  const int s = s_min + static_cast<int>(rng.below(std::uint64_t(s_max - s_min + 1)));
  const int oy = static_cast<int>(rng.below(std::uint64_t(h - s + 1)));
  const int ox = static_cast<int>(rng.below(std::uint64_t(w - s + 1)));

  std::vector<float> out(std::size_t(c) * h * w, 0.0f);
  std::vector<float> plane(std::size_t(s) * s);
  for (int ch = 0; ch < c; ++ch) {
    resize_plane(x + std::size_t(ch) * h * w, h, w, plane.data(), s, cfg.interp);
    for (int y = 0; y < s; ++y)
      std::copy_n(plane.data() + std::size_t(y) * s, s,
                  out.data() + (std::size_t(ch) * h + y + oy) * w + ox);
  }
  return out;
}

std::vector<float> gaussian_noise_defense(const float* x, std::size_t n, double stddev, Rng& rng) {
  if (stddev < 0) throw std::invalid_argument("gaussian_noise_defense: stddev must be >= 0");
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::clamp(static_cast<float>(x[i] + stddev * rng.normal()), 0.0f, 1.0f);
  return out;
}

} // namespace plugdef::baseline
