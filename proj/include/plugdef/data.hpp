#pragma once
// Dataset ingestion (IDX files, procedural corpora), the deterministic
// n-shot sampler, the fixed test subset, and the shared desk geometry
// convention (zero-pad to 32x32, replicate gray to 3 channels).
#include <cstdint>
#include <string>
#include <vector>

#include "plugdef/rng.hpp"

namespace plugdef::data {

struct Dataset {
  std::string name;
  int C = 1, H = 28, W = 28, K = 10;
  std::vector<float> images; // [N, C, H, W], values in [0, 1]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t pixels() const { return std::size_t(C) * H * W; }
  const float* image(std::size_t i) const { return images.data() + i * pixels(); }
  void validate() const; // labels in [0,K), >= 1 example per class
};

// IDX format: big-endian magic 0x00000803 (images) / 0x00000801 (labels),
// big-endian dims, then raw bytes. Pixels are scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx_images(const std::string& path, int n, int h, int w,
                     const std::vector<unsigned char>& px);
void save_idx_labels(const std::string& path, const std::vector<unsigned char>& labels);

// Centered zero-pad to pad_to x pad_to and/or replicate gray to `channels`.
Dataset conventionize(const Dataset& ds, int pad_to, int channels);

// Procedural colored-shapes corpus (32x32 RGB, class-keyed hue + geometry).
struct SyntheticSpec {
  int classes = 10;
  int count = 2000;
  int height = 32, width = 32;
};
Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Procedural stroke-rendered digits in MNIST geometry (28x28 grayscale).
struct DigitsSpec {
  int count = 10000;
  double contrast = 1.0; // scales stroke intensity
};
Dataset gen_digits(const DigitsSpec& spec, std::uint64_t seed);

// Writes a digits corpus as an IDX pair (images/labels), bit-exact format.
void write_digits_idx(const DigitsSpec& spec, std::uint64_t seed,
                      const std::string& images_path, const std::string& labels_path);

// Per class: stable filter, seeded shuffle, take first n; concatenate; final
// seeded shuffle. Streams: seed split by "nshot.class.<k>" and "nshot.mix".
std::vector<std::size_t> nshot_sample(const Dataset& ds, int n_per_class, std::uint64_t seed);

// Seeded shuffle of [0, N), first n; class balance not guaranteed.
std::vector<std::size_t> random_sample(const Dataset& ds, std::size_t n, std::uint64_t seed);

// Seeded shuffle, first `size`; stable across the whole experiment suite.
std::vector<std::size_t> fixed_test_subset(const Dataset& ds, std::size_t size, std::uint64_t seed);

} // namespace plugdef::data
