#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "plugdef/attack.hpp"

using namespace plugdef;
namespace fs = std::filesystem;

namespace {

// small frozen random-weight victim; attacks only need gradients, not skill
std::unique_ptr<victim::Victim<float>> toy_victim(std::uint64_t seed = 21) {
  victim::MlpArch arch;
  arch.hidden = {12};
  auto m = std::make_unique<victim::MlpVictim<float>>(arch, 3, 1, 4, 4, seed);
  m->freeze();
  return m;
}

std::vector<float> random_image(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniformf();
  return v;
}

} // namespace

TEST_CASE("project: inside-ball points pass through, outside points land on the boundary") {
  // linf scalar case: center 0.5, eps 0.1, v 0.9 -> 0.6
  float v = 0.9f, c = 0.5f;
  attack::detail::project(std::size_t(1), &v, &c, attack::Norm::Linf, 0.1);
  CHECK(v == doctest::Approx(0.6f));

  std::vector<double> center = {0.2, 0.4, 0.6};
  std::vector<double> inside = {0.25, 0.38, 0.61};
  auto vin = inside;
  attack::detail::project(vin.size(), vin.data(), center.data(), attack::Norm::L2, 0.2);
  CHECK(vin == inside);

  std::vector<double> outside = {0.9, 0.9, 0.9};
  auto vout = outside;
  attack::detail::project(vout.size(), vout.data(), center.data(), attack::Norm::L2, 0.2);
  double d2 = 0;
  for (std::size_t i = 0; i < 3; ++i) d2 += (vout[i] - center[i]) * (vout[i] - center[i]);
  CHECK(std::sqrt(d2) == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("fgsm with eps = 0 returns the input") {
  auto m = toy_victim();
  Rng rng(5);
  auto x = random_image(16, rng);
  auto ex = attack::fgsm(*m, x.data(), 0, 1, 0.0);
  CHECK(ex.pixels == x);
  CHECK(ex.distortion == 0.0);
}

TEST_CASE("fgsm equals single-step pgd with alpha = eps, bit-exactly") {
  auto m = toy_victim();
  Rng rng(6);
  attack::AttackConfig cfg;
  cfg.norm = attack::Norm::Linf;
  cfg.epsilon = 8.0 / 255.0;
  cfg.steps = 1;
  cfg.step_size = cfg.epsilon;
  cfg.variant = attack::Variant::Pgd;
  for (int trial = 0; trial < 16; ++trial) {
    auto x = random_image(16, rng);
    auto a = attack::fgsm(*m, x.data(), trial, trial % 3, cfg.epsilon);
    auto b = attack::pgd(*m, x.data(), trial, trial % 3, cfg);
    CHECK(a.pixels == b.pixels);
  }
}

TEST_CASE("attack outputs respect the norm bound and the unit box exactly") {
  auto m = toy_victim();
  Rng rng(7);
  attack::AttackConfig cfg; // defaults: linf 8/255, 10 steps, eps/4
  for (int trial = 0; trial < 8; ++trial) {
    auto x = random_image(16, rng);
    for (auto variant : {attack::Variant::Pgd, attack::Variant::Apgd}) {
      cfg.variant = variant;
      auto ex = attack::attack_one(*m, x.data(), trial, trial % 3, cfg);
      CHECK(ex.distortion <= cfg.epsilon + 1e-6);
      for (std::size_t i = 0; i < ex.pixels.size(); ++i) {
        CHECK(ex.pixels[i] >= 0.0f);
        CHECK(ex.pixels[i] <= 1.0f);
        CHECK(std::abs(double(ex.pixels[i]) - double(x[i])) <= cfg.epsilon + 1e-6);
      }
    }
  }
  // l2 variant
  cfg.norm = attack::Norm::L2;
  cfg.epsilon = 128.0 / 255.0;
  cfg.variant = attack::Variant::Pgd;
  auto x = random_image(16, rng);
  auto ex = attack::pgd(*m, x.data(), 0, 2, cfg);
  CHECK(ex.distortion <= cfg.epsilon + 1e-6);
}

TEST_CASE("pgd with zero steps returns the input unchanged") {
  auto m = toy_victim();
  Rng rng(8);
  auto x = random_image(16, rng);
  attack::AttackConfig cfg;
  cfg.steps = 0;
  auto ex = attack::pgd(*m, x.data(), 0, 0, cfg);
  CHECK(ex.pixels == x);
}

TEST_CASE("pgd never decreases the loss of a logistic toy victim on a 2-pixel grid") {
  // plain logistic model: 2 pixels, 2 classes, fixed weights
  victim::MlpArch arch;
  arch.hidden = {};
  victim::MlpVictim<float> m(arch, 2, 1, 1, 2, 1);
  // head weights [2 classes x 2 pixels]
  auto& w = m.params()[0]->tensor.data();
  w = {1.5f, -0.75f, -0.5f, 1.25f};
  auto& b = m.params()[1]->tensor.data();
  b = {0.1f, -0.1f};
  m.freeze();

  attack::AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.steps = 5;
  for (int gy = 0; gy <= 20; ++gy)
    for (int gx = 0; gx <= 20; ++gx) {
      const float px[2] = {gx / 20.0f, gy / 20.0f};
      for (int label = 0; label < 2; ++label) {
        auto ex = attack::pgd(m, px, 0, label, cfg);
        const std::vector<float> x0v = {px[0], px[1]};
        std::vector<float> xav = {ex.pixels[0], ex.pixels[1]};
        const double before = attack::detail::loss_at(m, x0v, label);
        const double after = attack::detail::loss_at(m, xav, label);
        CHECK(after >= before - 1e-7);
      }
    }
}

TEST_CASE("apgd with one step is a single signed step of 2*eps then projection") {
  auto m = toy_victim();
  Rng rng(9);
  auto x = random_image(16, rng);
  attack::AttackConfig cfg;
  cfg.variant = attack::Variant::Apgd;
  cfg.steps = 1;
  cfg.epsilon = 0.02;
  auto ex = attack::apgd(*m, x.data(), 0, 1, cfg);

  std::vector<float> x0(x.begin(), x.end());
  std::vector<float> g;
  attack::detail::input_gradient(*m, x0, 1, g);
  std::vector<float> expect(16);
  kern::sign(g.size(), g.data(), expect.data());
  for (std::size_t i = 0; i < 16; ++i) expect[i] = x0[i] + float(2 * cfg.epsilon) * expect[i];
  attack::detail::project(expect.size(), expect.data(), x0.data(), cfg.norm, cfg.epsilon);
  kern::clamp(expect.size(), expect.data(), 0.0f, 1.0f, expect.data());
  CHECK(ex.pixels == expect);
}

TEST_CASE("attacks are deterministic for a fixed (victim, input, cfg, seed)") {
  auto m = toy_victim();
  Rng rng(10);
  auto x = random_image(16, rng);
  for (auto variant : {attack::Variant::Fgsm, attack::Variant::Pgd, attack::Variant::Apgd}) {
    attack::AttackConfig cfg;
    cfg.variant = variant;
    cfg.seed = 19;
    auto a = attack::attack_one(*m, x.data(), 3, 1, cfg);
    auto b = attack::attack_one(*m, x.data(), 3, 1, cfg);
    CHECK(a.pixels == b.pixels);
    CHECK(a.distortion == b.distortion);
  }
}

TEST_CASE("adversarial corpus round-trips through its binary format") {
  auto m = toy_victim();
  data::Dataset ds;
  ds.C = 1; ds.H = 4; ds.W = 4; ds.K = 3;
  Rng rng(11);
  ds.images = random_image(5 * 16, rng);
  ds.labels = {0, 1, 2, 1, 0};
  attack::AttackConfig cfg;
  cfg.steps = 3;
  auto corpus = attack::attack_subset(*m, ds, {0, 2, 4}, cfg);
  CHECK(corpus.items.size() == 3);
  CHECK(corpus.victim_checksum == io::params_checksum(m->params()));

  const auto path = (fs::temp_directory_path() / "plugdef_corpus.bin").string();
  attack::save_corpus(path, corpus);
  auto loaded = attack::load_corpus(path);
  CHECK(loaded.items.size() == 3);
  CHECK(loaded.victim_checksum == corpus.victim_checksum);
  CHECK(loaded.cfg.epsilon == corpus.cfg.epsilon);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded.items[i].pixels == corpus.items[i].pixels);
    CHECK(loaded.items[i].origin == corpus.items[i].origin);
    CHECK(loaded.items[i].true_label == corpus.items[i].true_label);
    CHECK(loaded.items[i].distortion == corpus.items[i].distortion);
  }
  fs::remove(path);
}
