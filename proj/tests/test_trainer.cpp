#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "plugdef/trainer.hpp"

using namespace plugdef;
using defender::DefenderConfig;
using defender::PartitionPolicy;
using defender::ProcessorKind;

namespace {

// tiny victim + defender + separable 3-class data for fast tuning runs
struct Rig {
  data::Dataset train;
  std::unique_ptr<victim::Victim<float>> vic;
  std::unique_ptr<defender::Defender<float>> def;
  data::DefenseTrainSet ts;
  attack::AttackConfig acfg;

  explicit Rig(std::uint64_t seed = 1, data::SampleMode mode = data::SampleMode::OneAdv) {
    data::SyntheticSpec spec;
    spec.count = 120;
    spec.classes = 3;
    spec.height = 8;
    spec.width = 8;
    train = data::gen_synthetic(spec, seed);

    victim::VictimTrainConfig vcfg;
    vcfg.kind = "mlp";
    vcfg.mlp.hidden = {24};
    vcfg.epochs = 40;
    vcfg.lr = 3e-3;
    vcfg.floor = 0.9;
    vcfg.seed = seed;
    vic = victim::train_victim<float>(train, vcfg);

    acfg.steps = 10;
    data::SamplerConfig scfg;
    scfg.mode = mode;
    scfg.seed = seed;
    ts = data::build_defense_trainset(*vic, acfg, train, scfg);

    DefenderConfig dcfg;
    dcfg.in_c = 3; dcfg.in_h = 8; dcfg.in_w = 8;
    dcfg.patch = 4; dcfg.dim = 48; dcfg.layers = 2; dcfg.heads = 2;
    def = defender::build_defender<float>(dcfg, seed);
  }
};

} // namespace

TEST_CASE("lion: with zero weight decay every move is exactly 0 or +-lr") {
  Rng rng(1);
  ad::Parameter<float> p{"p", "g", ad::Tensor<float>::zeros({64}, true), true};
  for (auto& v : p.tensor.data()) v = rng.uniformf();
  train::LionConfig cfg;
  cfg.lr = 1e-3;
  train::Lion<float> opt({&p}, cfg);
  const float lr = 1e-3f;
  for (int step = 0; step < 50; ++step) {
    auto before = p.tensor.data();
    auto& g = p.tensor.grad();
    for (auto& v : g) v = float(rng.uniform(-1, 1)) * (rng.below(4) == 0 ? 0.0f : 1.0f);
    opt.step();
    for (std::size_t i = 0; i < before.size(); ++i) {
      // realized value must equal exactly one of the three legal moves
      const float after = p.tensor.data()[i];
      const bool ok = after == before[i] || after == before[i] - lr || after == before[i] + lr;
      CHECK(ok);
    }
    p.tensor.zero_grad();
  }
}

TEST_CASE("lion: zero gradient and zero momentum move nothing") {
  ad::Parameter<float> p{"p", "g", ad::Tensor<float>::full({8}, 0.5f, true), true};
  train::Lion<float> opt({&p}, train::LionConfig{});
  p.tensor.zero_grad();
  opt.step();
  for (float v : p.tensor.data()) CHECK(v == 0.5f);
}

TEST_CASE("lion: two steps on a 1-d quadratic match the hand-stepped trace") {
  // f(p) = p^2, g = 2p, lr = 0.1, b1 = 0.9, b2 = 0.99, start p = 1
  ad::Parameter<double> p{"p", "g", ad::Tensor<double>::full({1}, 1.0, true), true};
  train::LionConfig cfg;
  cfg.lr = 0.1;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.99;
  train::Lion<double> opt({&p}, cfg);

  p.tensor.grad()[0] = 2.0 * p.tensor.data()[0]; // g = 2
  opt.step(); // c = 0.1*2 = 0.2 -> u = 1 -> p = 0.9; m = 0.01*2 = 0.02
  CHECK(p.tensor.data()[0] == doctest::Approx(0.9));
  p.tensor.zero_grad();
  p.tensor.grad()[0] = 2.0 * p.tensor.data()[0]; // g = 1.8
  opt.step(); // c = 0.9*0.02 + 0.1*1.8 = 0.198 -> u = 1 -> p = 0.8
  CHECK(p.tensor.data()[0] == doctest::Approx(0.8));
}

TEST_CASE("trainset modes produce the documented sizes and tags") {
  Rig rig(3, data::SampleMode::OneAdvOneClean);
  CHECK(rig.ts.items.size() == 6); // K adversarial + K clean, K = 3
  int clean = 0, adv = 0;
  for (const auto& item : rig.ts.items) (item.is_adv ? adv : clean)++;
  CHECK(clean == 3);
  CHECK(adv == 3);
  for (const auto& item : rig.ts.items)
    CHECK(item.label == rig.train.labels[item.origin]); // ground-truth relabeling

  Rig one(4, data::SampleMode::OneAdv);
  CHECK(one.ts.items.size() == 3);

  // every adversarial item either flips the victim or carries the failed flag
  for (const auto& item : one.ts.items) {
    if (!item.is_adv) continue;
    const int pred = one.vic->predict_label(item.pixels.data());
    if (pred == item.label) CHECK(item.attack_failed);
  }

  data::SamplerConfig kcfg;
  kcfg.mode = data::SampleMode::KAdv;
  kcfg.k = 4;
  kcfg.seed = 5;
  auto kset = data::build_defense_trainset(*one.vic, one.acfg, one.train, kcfg);
  CHECK(kset.items.size() == 12);

  data::SamplerConfig bcfg;
  bcfg.mode = data::SampleMode::OneAdvBalanced;
  bcfg.seed = 6;
  auto bset = data::build_defense_trainset(*one.vic, one.acfg, one.train, bcfg);
  std::set<int> classes;
  for (const auto& item : bset.items) classes.insert(item.label);
  CHECK(classes.size() == 3);
}

TEST_CASE("lr = 0 leaves theta1 untouched and the loss trace flat") {
  Rig rig(7);
  const auto before = io::params_checksum(rig.def->params());
  train::TuneConfig cfg;
  cfg.epochs = 3;
  cfg.lion.lr = 0.0;
  cfg.eval_every = 0;
  cfg.seed = 7;
  auto log = train::tune_defender(*rig.def, *rig.vic, rig.ts, cfg);
  CHECK(io::params_checksum(rig.def->params()) == before);
  CHECK(log.rows.size() == 3);
  CHECK(log.rows[0].loss == doctest::Approx(log.rows[2].loss));
}

TEST_CASE("tuning moves theta1 only; theta2 and the victim stay bit-identical") {
  Rig rig(8);
  auto [theta1, theta2] = rig.def->partition();
  const auto theta2_before = io::params_checksum(theta2);
  const auto victim_before = io::params_checksum(rig.vic->params());
  std::vector<std::vector<float>> theta1_before;
  for (auto* p : theta1) theta1_before.push_back(p->tensor.data());

  train::TuneConfig cfg;
  cfg.epochs = 5;
  cfg.lion.lr = 1e-3;
  cfg.eval_every = 0;
  cfg.seed = 8;
  auto log = train::tune_defender(*rig.def, *rig.vic, rig.ts, cfg);

  CHECK(io::params_checksum(theta2) == theta2_before);
  CHECK(io::params_checksum(rig.vic->params()) == victim_before);
  bool moved = false;
  for (std::size_t i = 0; i < theta1.size(); ++i)
    moved = moved || theta1[i]->tensor.data() != theta1_before[i];
  CHECK(moved);
  CHECK(log.rows.size() == 5);
}

TEST_CASE("tuning is deterministic given (seed, config)") {
  Rig a(9), b(9);
  train::TuneConfig cfg;
  cfg.epochs = 4;
  cfg.eval_every = 2;
  cfg.seed = 9;

  data::Dataset test = a.train; // reuse as a stand-in test pool
  auto subset = data::fixed_test_subset(test, 16, 42);
  auto adv = attack::attack_subset(*a.vic, test, subset, a.acfg);
  train::EvalContext ev{&test, subset, &adv};

  auto la = train::tune_defender(*a.def, *a.vic, a.ts, cfg, &ev);
  auto adv_b = attack::attack_subset(*b.vic, test, subset, b.acfg);
  train::EvalContext evb{&test, subset, &adv_b};
  auto lb = train::tune_defender(*b.def, *b.vic, b.ts, cfg, &evb);

  REQUIRE(la.rows.size() == lb.rows.size());
  for (std::size_t i = 0; i < la.rows.size(); ++i) {
    CHECK(la.rows[i].loss == lb.rows[i].loss);
    CHECK(la.rows[i].train_ca == lb.rows[i].train_ca);
    CHECK(la.rows[i].train_aa == lb.rows[i].train_aa);
    CHECK(la.rows[i].has_test == lb.rows[i].has_test);
    if (la.rows[i].has_test) {
      CHECK(la.rows[i].test_ca == lb.rows[i].test_ca);
      CHECK(la.rows[i].test_aa == lb.rows[i].test_aa);
    }
  }
  CHECK(io::params_checksum(a.def->params()) == io::params_checksum(b.def->params()));
}

TEST_CASE("a zero-feature defender reports exactly the bare-victim test accuracy") {
  Rig rig(10);
  rig.def->set_zero_decoder_input(true);
  data::Dataset test = rig.train;
  auto subset = data::fixed_test_subset(test, 20, 42);
  auto adv = attack::attack_subset(*rig.vic, test, subset, rig.acfg);
  train::EvalContext ev{&test, subset, &adv};
  auto row = train::epoch_eval(*rig.def, *rig.vic, rig.ts, &ev, 0, true);

  CHECK(row.test_ca == doctest::Approx(victim::accuracy(*rig.vic, test, subset)));
  std::size_t ok = 0;
  for (const auto& ex : adv.items) ok += rig.vic->predict_label(ex.pixels.data()) == ex.true_label;
  CHECK(row.test_aa == doctest::Approx(double(ok) / double(adv.items.size())));
}

TEST_CASE("a saved checkpoint reproduces the last curve row exactly") {
  Rig rig(11);
  train::TuneConfig cfg;
  cfg.epochs = 3;
  cfg.eval_every = 0;
  cfg.seed = 11;
  auto log = train::tune_defender(*rig.def, *rig.vic, rig.ts, cfg);

  const auto path = (std::filesystem::temp_directory_path() / "plugdef_tuned.bin").string();
  defender::save_defender(path, *rig.def);
  auto loaded = defender::load_defender<float>(path);
  auto row = train::epoch_eval(*loaded, *rig.vic, rig.ts, nullptr, 3, false);
  CHECK(row.loss == log.rows.back().loss);
  CHECK(row.train_ca == log.rows.back().train_ca);
  CHECK(row.train_aa == log.rows.back().train_aa);
  std::filesystem::remove(path);
}

TEST_CASE("NaN loss aborts with a diagnostic") {
  Rig rig(12);
  // logistic victim (no relu to absorb the NaN) and a linear defender
  victim::MlpArch arch;
  arch.hidden = {};
  auto vic = std::make_unique<victim::MlpVictim<float>>(arch, 3, 3, 8, 8, 12);
  vic->freeze();
  DefenderConfig dcfg = rig.def->config();
  dcfg.processor = ProcessorKind::Linear;
  dcfg.policy = PartitionPolicy::All;
  auto d = defender::build_defender<float>(dcfg, 12);
  d->params()[0]->tensor.data()[0] = std::nanf("");
  train::TuneConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 12;
  CHECK_THROWS_AS(train::tune_defender(*d, *vic, rig.ts, cfg), train::TuneAbort);
}

TEST_CASE("curve log round-trips through jsonl") {
  train::CurveLog log;
  log.rows.push_back({1, 2.5, 0.5, 0.25, false, 0, 0});
  log.rows.push_back({2, 1.25, 0.75, 0.5, true, 0.8, 0.4});
  std::stringstream ss;
  log.to_jsonl(ss);
  auto back = train::CurveLog::from_jsonl(ss);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].epoch == 1);
  CHECK(back.rows[0].loss == 2.5);
  CHECK_FALSE(back.rows[0].has_test);
  CHECK(back.rows[1].has_test);
  CHECK(back.rows[1].test_aa == 0.4);
}
