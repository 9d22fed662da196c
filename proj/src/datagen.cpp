// Procedural corpora: stroke-rendered digits in MNIST geometry and a
// colored-shapes RGB set. Both are pure functions of (spec, seed); every
// image gets its own purpose-split stream so ordering never matters.
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "plugdef/data.hpp"

namespace plugdef::data {

namespace {

using Point = std::pair<double, double>;
using Polyline = std::vector<Point>;

Polyline arc(double cx, double cy, double rx, double ry, double a0_deg, double a1_deg, int nseg) {
  Polyline out;
  for (int i = 0; i <= nseg; ++i) {
    const double a = (a0_deg + (a1_deg - a0_deg) * i / nseg) * std::numbers::pi / 180.0;
    out.emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
  }
  return out;
}

// Glyph skeletons in a [0,1] box, x right, y down.
std::vector<Polyline> digit_glyph(int d) {
  switch (d) {
    case 0: return {arc(0.5, 0.5, 0.26, 0.36, 0, 360, 16)};
    case 1: return {{{0.33, 0.28}, {0.54, 0.12}, {0.54, 0.88}}};
    case 2: {
      auto top = arc(0.5, 0.32, 0.24, 0.20, 180, 360, 8);
      top.insert(top.end(), {{0.74, 0.32}, {0.28, 0.88}, {0.76, 0.88}});
      return {top};
    }
    case 3: return {arc(0.47, 0.30, 0.23, 0.19, 210, 450, 10), arc(0.47, 0.66, 0.24, 0.20, 270, 510, 10)};
    case 4: return {{{0.62, 0.10}, {0.24, 0.62}, {0.80, 0.62}}, {{0.62, 0.34}, {0.62, 0.90}}};
    case 5: return {{{0.74, 0.12}, {0.32, 0.12}, {0.30, 0.46}}, arc(0.48, 0.65, 0.22, 0.21, 250, 490, 10)};
    case 6: return {{{0.60, 0.10}, {0.40, 0.42}}, arc(0.48, 0.65, 0.21, 0.22, 0, 360, 14)};
    case 7: return {{{0.26, 0.12}, {0.74, 0.12}, {0.42, 0.88}}};
    case 8: return {arc(0.5, 0.30, 0.18, 0.17, 0, 360, 12), arc(0.5, 0.67, 0.22, 0.20, 0, 360, 12)};
    case 9: return {arc(0.5, 0.34, 0.20, 0.20, 0, 360, 12), {{0.70, 0.36}, {0.60, 0.88}}};
    default: throw std::invalid_argument("digit_glyph: digit must be 0-9");
  }
}

double seg_dist(double px, double py, const Point& a, const Point& b) {
  const double vx = b.first - a.first, vy = b.second - a.second;
  const double wx = px - a.first, wy = py - a.second;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

void render_digit(int digit, Rng& rng, double contrast, float* out, int hw) {
  const double rot = rng.uniform(-0.18, 0.18);
  const double s = rng.uniform(0.80, 1.05);
  const double tx = rng.uniform(-0.07, 0.07);
  const double ty = rng.uniform(-0.07, 0.07);
  const double half_w = rng.uniform(0.90, 1.45);       // stroke half width, px
  const double ink = rng.uniform(0.65, 1.0) * contrast;
  const double cr = std::cos(rot), sr = std::sin(rot);

  std::vector<std::pair<Point, Point>> segs;
  for (const auto& line : digit_glyph(digit)) {
    Point prev{};
    bool first = true;
    for (const auto& g : line) {
      const double gx = g.first - 0.5, gy = g.second - 0.5;
      Point p{(s * (cr * gx - sr * gy) + 0.5 + tx) * hw, (s * (sr * gx + cr * gy) + 0.5 + ty) * hw};
      if (!first) segs.emplace_back(prev, p);
      prev = p;
      first = false;
    }
  }

  const double aa = 1.0;
  for (int y = 0; y < hw; ++y)
    for (int x = 0; x < hw; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double dist = 1e9;
      for (const auto& sg : segs) dist = std::min(dist, seg_dist(px, py, sg.first, sg.second));
      const double cov = std::clamp((half_w + aa * 0.5 - dist) / aa, 0.0, 1.0);
      out[std::size_t(y) * hw + x] = static_cast<float>(std::min(1.0, ink * cov));
    }
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

// class-keyed geometries; returns 1 inside the shape
bool shape_hit(int kind, double dx, double dy, double r) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  const double rad = std::sqrt(dx * dx + dy * dy);
  switch (kind % 10) {
    case 0: return rad <= r;                                        // disk
    case 1: return rad <= r && rad >= 0.55 * r;                     // ring
    case 2: return ax <= r * 0.82 && ay <= r * 0.82;                // square
    case 3: return ax + ay <= r * 1.1;                              // diamond
    case 4: return dy >= -r && dy <= r && ax <= (dy + r) * 0.6;     // triangle
    case 5: return (ax <= r * 0.3 && ay <= r) || (ay <= r * 0.3 && ax <= r); // cross
    case 6: return ay <= r * 0.35 && ax <= r;                       // horizontal bar
    case 7: return ax <= r * 0.35 && ay <= r;                       // vertical bar
    case 8: return std::abs(ax - ay) <= r * 0.3 && ax <= r && ay <= r; // X
    default: {
      const double gx = std::fmod(ax, r * 0.7), gy = std::fmod(ay, r * 0.7); // dot grid
      return rad <= r && gx <= r * 0.35 && gy <= r * 0.35;
    }
  }
}

} // namespace

Dataset gen_digits(const DigitsSpec& spec, std::uint64_t seed) {
  Dataset ds;
  ds.name = "digits";
  ds.C = 1; ds.H = 28; ds.W = 28; ds.K = 10;
  ds.images.resize(std::size_t(spec.count) * 28 * 28);
  ds.labels.resize(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    const int digit = i % 10; // stratified
    Rng rng = Rng::from(seed, "digit." + std::to_string(i));
    render_digit(digit, rng, spec.contrast, ds.images.data() + std::size_t(i) * 784, 28);
    ds.labels[i] = digit;
  }
  return ds;
}

void write_digits_idx(const DigitsSpec& spec, std::uint64_t seed,
                      const std::string& images_path, const std::string& labels_path) {
  const Dataset ds = gen_digits(spec, seed);
  std::vector<unsigned char> px(ds.images.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<unsigned char>(std::lround(std::clamp(ds.images[i], 0.0f, 1.0f) * 255.0f));
  std::vector<unsigned char> labels(ds.labels.begin(), ds.labels.end());
  save_idx_images(images_path, static_cast<int>(ds.size()), 28, 28, px);
  save_idx_labels(labels_path, labels);
}

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  Dataset ds;
  ds.name = "synthetic";
  ds.C = 3; ds.H = spec.height; ds.W = spec.width; ds.K = spec.classes;
  ds.images.resize(std::size_t(spec.count) * ds.pixels());
  ds.labels.resize(spec.count);
  const int H = ds.H, W = ds.W;
  for (int i = 0; i < spec.count; ++i) {
    const int k = i % spec.classes; // stratified
    ds.labels[i] = k;
    Rng rng = Rng::from(seed, "synth." + std::to_string(i));

    const double hue = (k + 0.5) / spec.classes + rng.uniform(-0.25, 0.25) / spec.classes;
    double fg[3];
    hsv_to_rgb(hue, rng.uniform(0.55, 0.85), rng.uniform(0.60, 0.90), fg);

    const double base = rng.uniform(0.25, 0.50);
    const double gx = rng.uniform(-0.10, 0.10), gy = rng.uniform(-0.10, 0.10);
    const double tint[3] = {rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04)};
    const double cx = W / 2.0 + rng.uniform(-4.0, 4.0);
    const double cy = H / 2.0 + rng.uniform(-4.0, 4.0);
    const double r = rng.uniform(7.0, 11.0);

    float* img = ds.images.data() + std::size_t(i) * ds.pixels();
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double noise = rng.uniform(-0.06, 0.06);
        const double bg = base + gx * (x - W / 2.0) / W + gy * (y - H / 2.0) / H + noise;
        const bool hit = shape_hit(k, x + 0.5 - cx, y + 0.5 - cy, r);
        for (int c = 0; c < 3; ++c) {
          const double v = hit ? fg[c] : bg + tint[c];
          img[(std::size_t(c) * H + y) * W + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
  }
  return ds;
}

} // namespace plugdef::data
