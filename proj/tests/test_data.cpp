#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "plugdef/data.hpp"
#include "plugdef/ops.hpp"
#include "plugdef/victim.hpp"

using namespace plugdef;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("plugdef_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("idx round trip on a hand-built two-image fixture") {
  TempDir tmp;
  // 2 images of 2x3, known bytes
  std::vector<unsigned char> px = {0, 51, 102, 153, 204, 255, 10, 20, 30, 40, 50, 60};
  data::save_idx_images(tmp.file("img"), 2, 2, 3, px);
  data::save_idx_labels(tmp.file("lab"), {1, 0});
  auto ds = data::load_idx(tmp.file("img"), tmp.file("lab"));
  CHECK(ds.size() == 2);
  CHECK(ds.H == 2);
  CHECK(ds.W == 3);
  CHECK(ds.labels == std::vector<int>{1, 0});
  CHECK(ds.images[0] == 0.0f);
  CHECK(ds.images[1] == doctest::Approx(51.0f / 255.0f));
  CHECK(ds.images[5] == 1.0f);
  CHECK(ds.images[6] == doctest::Approx(10.0f / 255.0f));
}

TEST_CASE("idx loader rejects bad magic and truncation") {
  TempDir tmp;
  std::vector<unsigned char> px(2 * 2 * 3, 7);
  data::save_idx_images(tmp.file("img"), 2, 2, 3, px);
  data::save_idx_labels(tmp.file("lab"), {0, 1});

  // corrupt the magic
  {
    auto bytes = io::read_file(tmp.file("img"));
    bytes[3] = 0x42;
    io::write_file(tmp.file("bad_magic"), bytes);
    CHECK_THROWS_WITH_AS(data::load_idx(tmp.file("bad_magic"), tmp.file("lab")),
                         doctest::Contains("bad magic"), std::runtime_error);
  }
  // truncate the pixel payload
  {
    auto bytes = io::read_file(tmp.file("img"));
    bytes.resize(bytes.size() - 5);
    io::write_file(tmp.file("short"), bytes);
    CHECK_THROWS_WITH_AS(data::load_idx(tmp.file("short"), tmp.file("lab")),
                         doctest::Contains("truncated"), std::runtime_error);
  }
}

TEST_CASE("conventionize pads centered and replicates channels") {
  data::Dataset ds;
  ds.C = 1; ds.H = 2; ds.W = 2; ds.K = 1;
  ds.images = {0.1f, 0.2f, 0.3f, 0.4f};
  ds.labels = {0};
  auto out = data::conventionize(ds, 4, 3);
  CHECK(out.C == 3);
  CHECK(out.H == 4);
  CHECK(out.W == 4);
  // the 2x2 block lands at offset (1,1) in every channel
  for (int c = 0; c < 3; ++c) {
    CHECK(out.images[(std::size_t(c) * 4 + 1) * 4 + 1] == 0.1f);
    CHECK(out.images[(std::size_t(c) * 4 + 2) * 4 + 2] == 0.4f);
    CHECK(out.images[(std::size_t(c) * 4 + 0) * 4 + 0] == 0.0f);
  }
}

TEST_CASE("digit corpus is deterministic, stratified and in range") {
  data::DigitsSpec spec;
  spec.count = 50;
  auto a = data::gen_digits(spec, 7);
  auto b = data::gen_digits(spec, 7);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  auto c = data::gen_digits(spec, 8);
  CHECK(a.images != c.images);
  for (int i = 0; i < 50; ++i) CHECK(a.labels[i] == i % 10);
  for (float v : a.images) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  a.validate();
}

TEST_CASE("synthetic corpus: determinism and exact stratification") {
  data::SyntheticSpec spec;
  spec.count = 2000;
  auto a = data::gen_synthetic(spec, 3);
  auto b = data::gen_synthetic(spec, 3);
  CHECK(a.images == b.images);
  std::vector<int> per_class(10, 0);
  for (int y : a.labels) ++per_class[y];
  for (int k = 0; k < 10; ++k) CHECK(per_class[k] == 200);
  a.validate();
}

TEST_CASE("synthetic classes are learnable by a linear probe") {
  data::SyntheticSpec spec;
  spec.count = 1200;
  auto ds = data::gen_synthetic(spec, 11);
  // linear softmax probe on raw pixels
  victim::VictimTrainConfig cfg;
  cfg.kind = "mlp";
  cfg.mlp.hidden = {}; // no hidden layer: plain logistic regression
  cfg.epochs = 12;
  cfg.lr = 2e-3;
  cfg.floor = 0.80;
  cfg.seed = 5;
  victim::TrainReport rep;
  auto probe = victim::train_victim<float>(ds, cfg, &rep);
  CHECK(rep.holdout_acc >= 0.80);
}

TEST_CASE("nshot sampler: balance, determinism, insufficiency error") {
  data::DigitsSpec spec;
  spec.count = 60;
  auto ds = data::gen_digits(spec, 11);
  auto idx = data::nshot_sample(ds, 1, 42);
  CHECK(idx.size() == 10);
  std::set<int> classes;
  for (auto i : idx) classes.insert(ds.labels[i]);
  CHECK(classes.size() == 10);
  CHECK(idx == data::nshot_sample(ds, 1, 42));
  CHECK(idx != data::nshot_sample(ds, 1, 43));
  CHECK_THROWS_WITH_AS(data::nshot_sample(ds, 7, 42), doctest::Contains("class"), std::runtime_error);
}

TEST_CASE("nshot sampler matches a hand-simulated trace of the documented PRNG") {
  // 12-example toy set, K = 3, labels 0,1,2,0,1,2,...
  data::Dataset ds;
  ds.C = 1; ds.H = 1; ds.W = 1; ds.K = 3;
  ds.images.assign(12, 0.5f);
  for (int i = 0; i < 12; ++i) ds.labels.push_back(i % 3);
  const std::uint64_t seed = 99;

  // hand-rolled splitmix64 + rejection sampling + Fisher-Yates, no Rng class
  auto splitmix = [](std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  auto fnv = [](const std::string& s, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  };
  auto below = [&](std::uint64_t& s, std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = splitmix(s);
      if (r >= threshold) return r % bound;
    }
  };
  auto shuffle = [&](std::vector<std::size_t>& v, std::uint64_t& s) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(s, i)]);
  };

  std::vector<std::size_t> expect;
  for (int k = 0; k < 3; ++k) {
    std::vector<std::size_t> cls;
    for (std::size_t i = 0; i < 12; ++i)
      if (ds.labels[i] == k) cls.push_back(i);
    std::uint64_t state = fnv("nshot.class." + std::to_string(k), seed ^ 0x9E3779B97F4A7C15ull);
    shuffle(cls, state);
    expect.insert(expect.end(), cls.begin(), cls.begin() + 2);
  }
  std::uint64_t mix = fnv("nshot.mix", seed ^ 0x9E3779B97F4A7C15ull);
  shuffle(expect, mix);

  CHECK(data::nshot_sample(ds, 2, seed) == expect);
}

TEST_CASE("random sampler: permutation, determinism, same-class frequency") {
  data::DigitsSpec spec;
  spec.count = 40;
  auto ds = data::gen_digits(spec, 2);
  auto all = data::random_sample(ds, 40, 1);
  std::set<std::size_t> uniq(all.begin(), all.end());
  CHECK(uniq.size() == 40);
  CHECK(data::random_sample(ds, 5, 9) == data::random_sample(ds, 5, 9));
  CHECK_THROWS_AS(data::random_sample(ds, 41, 1), std::invalid_argument);

  // K = 2 balanced set, n = 2: P(same class) = (N/2 - 1)/(N - 1) ~ 0.495
  data::Dataset two;
  two.C = 1; two.H = 1; two.W = 1; two.K = 2;
  two.images.assign(100, 0.0f);
  for (int i = 0; i < 100; ++i) two.labels.push_back(i % 2);
  int same = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto pick = data::random_sample(two, 2, seed);
    same += two.labels[pick[0]] == two.labels[pick[1]];
  }
  CHECK(same > 450);
  CHECK(same < 550);
}

TEST_CASE("imbalance exists for some seed in plain random one-shot draws") {
  data::Dataset small;
  small.C = 1; small.H = 1; small.W = 1; small.K = 2;
  small.images.assign(8, 0.0f);
  for (int i = 0; i < 8; ++i) small.labels.push_back(i % 2);
  bool found_imbalanced = false;
  for (std::uint64_t seed = 0; seed < 64 && !found_imbalanced; ++seed) {
    auto pick = data::random_sample(small, 2, seed);
    found_imbalanced = small.labels[pick[0]] == small.labels[pick[1]];
  }
  CHECK(found_imbalanced);
}

TEST_CASE("fixed test subset: determinism and bounds") {
  data::DigitsSpec spec;
  spec.count = 30;
  auto ds = data::gen_digits(spec, 4);
  auto sub = data::fixed_test_subset(ds, 30, 42);
  std::set<std::size_t> uniq(sub.begin(), sub.end());
  CHECK(uniq.size() == 30); // size = N gives a permutation
  CHECK(data::fixed_test_subset(ds, 12, 42) == data::fixed_test_subset(ds, 12, 42));
  CHECK_THROWS_AS(data::fixed_test_subset(ds, 31, 42), std::invalid_argument);
}
