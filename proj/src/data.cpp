#include "plugdef/data.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "plugdef/serialize.hpp"

namespace plugdef::data {

void Dataset::validate() const {
  if (images.size() != size() * pixels()) throw std::runtime_error("dataset: image buffer size mismatch");
  std::vector<int> per_class(K, 0);
  for (int y : labels) {
    if (y < 0 || y >= K) throw std::runtime_error("dataset: label out of range");
    ++per_class[y];
  }
  for (int k = 0; k < K; ++k)
    if (per_class[k] == 0) throw std::runtime_error("dataset: class " + std::to_string(k) + " empty");
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path, std::size_t& off) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx parse error in " + path + ": truncated at byte " + std::to_string(off));
  off += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path);
  std::size_t off = 0;
  const auto img_magic = read_be32(img, images_path, off);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("idx parse error in " + images_path + ": bad magic at byte 0");
  const auto n = read_be32(img, images_path, off);
  const auto h = read_be32(img, images_path, off);
  const auto w = read_be32(img, images_path, off);

  Dataset ds;
  ds.name = "idx";
  ds.C = 1;
  ds.H = static_cast<int>(h);
  ds.W = static_cast<int>(w);
  const std::size_t total = std::size_t(n) * h * w;
  std::vector<unsigned char> raw(total);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(img.gcount()) != total)
    throw std::runtime_error("idx parse error in " + images_path + ": truncated at byte " +
                             std::to_string(off + static_cast<std::size_t>(img.gcount())));
  ds.images.resize(total);
  for (std::size_t i = 0; i < total; ++i) ds.images[i] = float(raw[i]) / 255.0f;

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open " + labels_path);
  std::size_t loff = 0;
  const auto lab_magic = read_be32(lab, labels_path, loff);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("idx parse error in " + labels_path + ": bad magic at byte 0");
  const auto ln = read_be32(lab, labels_path, loff);
  if (ln != n) throw std::runtime_error("idx parse error: image/label count mismatch");
  std::vector<unsigned char> lraw(ln);
  lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(ln));
  if (static_cast<std::size_t>(lab.gcount()) != ln)
    throw std::runtime_error("idx parse error in " + labels_path + ": truncated at byte " +
                             std::to_string(loff + static_cast<std::size_t>(lab.gcount())));
  ds.labels.assign(lraw.begin(), lraw.end());
  ds.K = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

void save_idx_images(const std::string& path, int n, int h, int w,
                     const std::vector<unsigned char>& px) {
  if (px.size() != std::size_t(n) * h * w) throw std::invalid_argument("save_idx_images: size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_be32(out, 0x00000803u);
  write_be32(out, static_cast<std::uint32_t>(n));
  write_be32(out, static_cast<std::uint32_t>(h));
  write_be32(out, static_cast<std::uint32_t>(w));
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

void save_idx_labels(const std::string& path, const std::vector<unsigned char>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_be32(out, 0x00000801u);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset conventionize(const Dataset& ds, int pad_to, int channels) {
  const int H2 = pad_to > 0 ? pad_to : ds.H;
  const int W2 = pad_to > 0 ? pad_to : ds.W;
  const int C2 = channels > 0 ? channels : ds.C;
  if (H2 < ds.H || W2 < ds.W) throw std::invalid_argument("conventionize: pad target smaller than image");
  if (C2 != ds.C && ds.C != 1) throw std::invalid_argument("conventionize: can only replicate single-channel data");
  Dataset out;
  out.name = ds.name;
  out.C = C2;
  out.H = H2;
  out.W = W2;
  out.K = ds.K;
  out.labels = ds.labels;
  out.images.assign(ds.size() * out.pixels(), 0.0f);
  const int oy = (H2 - ds.H) / 2, ox = (W2 - ds.W) / 2;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const float* src = ds.image(i);
    float* dst = out.images.data() + i * out.pixels();
    for (int c = 0; c < C2; ++c) {
      const float* srcc = src + std::size_t(ds.C == 1 ? 0 : c) * ds.H * ds.W;
      for (int y = 0; y < ds.H; ++y)
        std::copy_n(srcc + std::size_t(y) * ds.W, ds.W,
                    dst + (std::size_t(c) * H2 + y + oy) * W2 + ox);
    }
  }
  return out;
}

std::vector<std::size_t> nshot_sample(const Dataset& ds, int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("nshot_sample: n must be >= 1");
  std::vector<std::size_t> picked;
  picked.reserve(std::size_t(ds.K) * n_per_class);
  for (int k = 0; k < ds.K; ++k) {
    std::vector<std::size_t> cls;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == k) cls.push_back(i);
    if (cls.size() < std::size_t(n_per_class))
      throw std::runtime_error("nshot_sample: class " + std::to_string(k) + " has only " +
                               std::to_string(cls.size()) + " examples");
    Rng rng = Rng::from(seed, "nshot.class." + std::to_string(k));
    rng.shuffle(cls);
    picked.insert(picked.end(), cls.begin(), cls.begin() + n_per_class);
  }
  Rng mix = Rng::from(seed, "nshot.mix");
  mix.shuffle(picked);
  return picked;
}

std::vector<std::size_t> random_sample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size()) throw std::invalid_argument("random_sample: n exceeds dataset size");
  Rng rng = Rng::from(seed, "random-sample");
  auto perm = rng.permutation(ds.size());
  perm.resize(n);
  return perm;
}

std::vector<std::size_t> fixed_test_subset(const Dataset& ds, std::size_t size, std::uint64_t seed) {
  if (ds.size() < size) throw std::invalid_argument("fixed_test_subset: dataset smaller than subset");
  Rng rng = Rng::from(seed, "fixed-test-subset");
  auto perm = rng.permutation(ds.size());
  perm.resize(size);
  return perm;
}

} // namespace plugdef::data
