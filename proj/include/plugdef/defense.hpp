#pragma once
// Test-time defense hook: maps an input image to the pixels actually fed to
// the service model. Implemented by the tuned defender and by the
// training-free baselines; evaluation code routes through it when present.
#include <cstddef>
#include <vector>

namespace plugdef {

struct PixelDefense {
  virtual ~PixelDefense() = default;
  // `index` identifies the test example so per-example noise is reproducible.
  virtual std::vector<float> apply(const float* x, int c, int h, int w, std::size_t index) const = 0;
};

} // namespace plugdef
