#pragma once
// Experiment orchestration: config-driven end-to-end runs (victim, attack
// cache, defense training set, tuning, evaluation), zero-shot transfer, and
// machine-readable outputs under a content-addressed store.
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plugdef/baseline.hpp"
#include "plugdef/trainer.hpp"

namespace plugdef::harness {

using nlohmann::json;

struct Options {
  std::string store = "runs_out"; // artifact root
  int threads = 1;
  bool timing = false; // emit measured wall seconds instead of 0.00
  std::optional<std::uint64_t> seed_override;
};

struct ResultRow {
  std::string dataset, victim, defender, attack;
  std::uint64_t seed = 0;
  double ca_pct = 0.0, aa_pct = 0.0, wall_s = 0.0;
};

enum class ResultFormat { Csv, Jsonl };

json load_config(const std::string& path);
double parse_epsilon(const json& v); // number or "a/b" fraction string
std::uint64_t spec_hash(const json& spec);
std::string hash_hex(std::uint64_t h, int digits = 16);

// CSV header: dataset,victim,defender,attack,seed,ca_pct,aa_pct,wall_s
void emit_results(const std::vector<ResultRow>& rows, const std::string& path, ResultFormat fmt);
std::vector<ResultRow> parse_results_csv(const std::string& path);

struct DatasetPair {
  std::string name;
  data::Dataset train, test;
};

// digits refs materialize through bit-exact IDX files in <store>/data, so
// every run exercises the parser; idx refs load user-provided files.
DatasetPair resolve_dataset(const json& cfg, const std::string& store);

victim::VictimTrainConfig parse_victim(const json& cfg);
attack::AttackConfig parse_attack(const json& cfg);
data::SamplerConfig parse_sampler(const json& cfg, std::uint64_t run_seed);
train::TuneConfig parse_tune(const json& cfg, std::uint64_t run_seed);
defender::DefenderConfig parse_defender_arm(const json& arm, const data::Dataset& geometry);

namespace detail {

template <typename T>
std::string ensure_victim(const json& spec, const DatasetPair& ds, const Options& opt,
                          std::unique_ptr<victim::Victim<T>>& out) {
  namespace fs = std::filesystem;
  json key{{"victim", spec.at("victim")}, {"dataset", spec.at("dataset")},
           {"precision", sizeof(T) == 4 ? "f32" : "f64"}};
  const auto dir = fs::path(opt.store) / "victims";
  fs::create_directories(dir);
  const auto path = (dir / (hash_hex(spec_hash(key)) + ".ckpt")).string();
  if (fs::exists(path)) {
    out = victim::load_victim<T>(path);
  } else {
    out = victim::train_victim<T>(ds.train, parse_victim(spec.at("victim")));
    victim::save_victim(path, *out);
  }
  return path;
}

template <typename T>
attack::AdvCorpus ensure_adv_cache(const victim::Victim<T>& vic, const DatasetPair& ds,
                                   const std::vector<std::size_t>& subset,
                                   const attack::AttackConfig& acfg, const Options& opt) {
  namespace fs = std::filesystem;
  json key{{"victim_checksum", io::params_checksum(vic.params())},
           {"eps", acfg.epsilon},
           {"steps", acfg.steps},
           {"step", acfg.resolved_step_size()},
           {"norm", int(acfg.norm)},
           {"variant", int(acfg.variant)},
           {"seed", acfg.seed},
           {"rs", acfg.random_start},
           {"subset", subset}};
  const auto dir = fs::path(opt.store) / "corpora";
  fs::create_directories(dir);
  const auto path = (dir / (hash_hex(spec_hash(key)) + ".bin")).string();
  if (fs::exists(path)) {
    auto corpus = attack::load_corpus(path);
    if (corpus.victim_checksum == io::params_checksum(vic.params())) return corpus;
  }
  auto corpus = attack::attack_subset(vic, ds.test, subset, acfg);
  attack::save_corpus(path, corpus);
  return corpus;
}

} // namespace detail

// CA over the clean subset, AA over its cached adversarial counterparts,
// both through the defense when present. The clean indices come from the
// corpus origins, so CA and AA always score exactly the same examples.
template <typename T>
std::pair<double, double> evaluate_ca_aa(const victim::Victim<T>& vic, const PixelDefense* defense,
                                         const data::Dataset& test, const attack::AdvCorpus& adv) {
  if (adv.victim_checksum != io::params_checksum(vic.params()))
    throw std::runtime_error("evaluate_ca_aa: adversarial cache was built against a different victim");
  std::vector<std::vector<float>> imgs;
  std::vector<int> labels;
  std::vector<std::size_t> origins;
  imgs.reserve(adv.items.size());
  for (const auto& ex : adv.items) {
    imgs.push_back(ex.pixels);
    labels.push_back(ex.true_label);
    origins.push_back(ex.origin);
  }
  const double ca = victim::accuracy(vic, test, origins, defense);
  const double aa = victim::accuracy_images(vic, imgs, labels, defense, &origins);
  return {ca, aa};
}

// One (arm, seed) cell: assemble the defense training set, tune when the arm
// trains, then evaluate. Artifacts land under <store>/runs/<spec>/<seed>/<arm>/.
template <typename T>
ResultRow run_arm(const json& spec, const json& arm, std::uint64_t seed, const DatasetPair& ds,
                  const victim::Victim<T>& vic, const std::vector<std::size_t>& subset,
                  const attack::AdvCorpus& adv, const Options& opt) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string arm_name = arm.at("name").get<std::string>();
  const std::string kind = arm.value("kind", "defender");
  const auto acfg = parse_attack(spec.at("attack"));

  const auto run_dir = fs::path(opt.store) / "runs" / hash_hex(spec_hash(spec), 8) /
                       std::to_string(seed) / arm_name;
  fs::create_directories(run_dir);

  ResultRow row;
  row.dataset = ds.name;
  row.victim = vic.kind();
  row.defender = arm_name;
  row.attack = acfg.label();
  row.seed = seed;

  std::unique_ptr<PixelDefense> defense;
  std::unique_ptr<defender::Defender<T>> def;
  if (kind == "none") {
    // no defense
  } else if (kind == "rp") {
    baseline::RpConfig rp;
    rp.s_min = arm.value("s_min", 0);
    rp.s_max = arm.value("s_max", 0);
    rp.interp = arm.value("interp", std::string("bilinear")) == "nearest"
                    ? baseline::RpConfig::Interp::Nearest
                    : baseline::RpConfig::Interp::Bilinear;
    defense = std::make_unique<baseline::RpDefense>(rp, seed);
  } else if (kind == "noise") {
    defense = std::make_unique<baseline::NoiseDefense>(arm.at("std").get<double>(), seed);
  } else if (kind == "defender") {
    auto dcfg = parse_defender_arm(arm, ds.train);
    def = defender::build_defender<T>(dcfg, seed);
    if (arm.contains("init") && arm.at("init").value("kind", "random") == "proxy") {
      const auto& init = arm.at("init");
      DatasetPair corpus = resolve_dataset(init.at("corpus"), opt.store);
      defender::proxy_pretrain(*def, corpus.train, init.value("steps", 300),
                               init.value("seed", seed));
    }
    auto ts = data::build_defense_trainset(vic, acfg, ds.train, parse_sampler(spec.at("sampler"), seed));
    auto tcfg = parse_tune(spec.at("tune"), seed);
    tcfg.curves_path = (run_dir / "curves.jsonl").string();
    tcfg.abort_snapshot_path = (run_dir / "abort.ckpt").string();
    train::EvalContext ev{&ds.test, subset, &adv};
    tune_defender(*def, vic, ts, tcfg, tcfg.eval_every > 0 ? &ev : nullptr);
    defender::save_defender((run_dir / "defender.ckpt").string(), *def);
    defense = std::make_unique<defender::DefenderDefense<T>>(def.get());
  } else {
    throw std::invalid_argument("unknown defender arm kind: " + kind);
  }

  auto [ca, aa] = evaluate_ca_aa(vic, defense.get(), ds.test, adv);
  row.ca_pct = 100.0 * ca;
  row.aa_pct = 100.0 * aa;
  const auto t1 = std::chrono::steady_clock::now();
  row.wall_s = opt.timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;

  json jrow{{"dataset", row.dataset}, {"victim", row.victim},   {"defender", row.defender},
            {"attack", row.attack},   {"seed", row.seed},       {"ca_pct", row.ca_pct},
            {"aa_pct", row.aa_pct},   {"wall_s", row.wall_s},   {"spec", spec},
            {"arm", arm}};
  io::write_file((run_dir / "row.json").string(), jrow.dump(2) + "\n");
  return row;
}

// Full protocol for one spec: victim (trained or loaded) -> adversarial test
// cache -> per (arm, seed) runs. Victim parameters are checksummed before and
// audited after every arm.
template <typename T>
std::vector<ResultRow> run_experiment(const json& spec, const Options& opt,
                                      const std::string& only_arm = "",
                                      std::vector<json>* failures = nullptr) {
  DatasetPair ds = resolve_dataset(spec.at("dataset"), opt.store);
  std::unique_ptr<victim::Victim<T>> vic;
  detail::ensure_victim(spec, ds, opt, vic);
  const std::uint64_t victim_sum = io::params_checksum(vic->params());

  std::vector<std::uint64_t> seeds;
  if (opt.seed_override) {
    seeds.push_back(*opt.seed_override);
  } else {
    for (const auto& s : spec.at("seeds")) seeds.push_back(s.get<std::uint64_t>());
  }
  if (seeds.empty()) throw std::invalid_argument("run_experiment: at least one seed required");

  const auto acfg = parse_attack(spec.at("attack"));
  const auto& subset_cfg = spec.at("subset");
  const std::size_t subset_size =
      std::min<std::size_t>(subset_cfg.value("size", 512), ds.test.size());

  std::vector<ResultRow> rows;
  std::vector<std::pair<std::size_t, std::size_t>> order; // (arm index, row index)
  for (std::uint64_t seed : seeds) {
    const std::uint64_t subset_seed =
        subset_cfg.contains("seed") ? subset_cfg.at("seed").get<std::uint64_t>() : seed;
    auto subset = data::fixed_test_subset(ds.test, subset_size, subset_seed);
    auto adv = detail::ensure_adv_cache(*vic, ds, subset, acfg, opt);
    std::size_t arm_idx = 0;
    for (const auto& arm : spec.at("defenders")) {
      const std::string arm_name = arm.at("name").get<std::string>();
      ++arm_idx;
      if (!only_arm.empty() && arm_name != only_arm) continue;
      try {
        ResultRow row = run_arm(spec, arm, seed, ds, *vic, subset, adv, opt);
        order.emplace_back(arm_idx, rows.size());
        rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        json fail{{"arm", arm_name}, {"seed", seed}, {"error", e.what()}};
        if (failures)
          failures->push_back(fail);
        else
          throw;
      }
      if (io::params_checksum(vic->params()) != victim_sum)
        throw std::runtime_error("victim parameters changed during arm " + arm_name);
    }
  }

  // spec order first, then seed order
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ResultRow> sorted;
  sorted.reserve(rows.size());
  for (const auto& [arm, idx] : order) sorted.push_back(rows[idx]);
  return sorted;
}

// Zero-shot transfer: a source-tuned defender evaluated in a target environment
// without re-tuning. Geometry mismatches error out.
template <typename T>
ResultRow transfer_eval(const std::string& defender_ckpt, const json& target_spec,
                        const Options& opt) {
  DatasetPair ds = resolve_dataset(target_spec.at("dataset"), opt.store);

  auto def = defender::load_defender<T>(defender_ckpt);
  const auto& cfg = def->config();
  if (cfg.in_c != ds.test.C || cfg.in_h != ds.test.H || cfg.in_w != ds.test.W)
    throw std::runtime_error("transfer_eval: defender geometry (" + std::to_string(cfg.in_c) + "," +
                             std::to_string(cfg.in_h) + "," + std::to_string(cfg.in_w) +
                             ") incompatible with target victim input (" +
                             std::to_string(ds.test.C) + "," + std::to_string(ds.test.H) + "," +
                             std::to_string(ds.test.W) + ")");

  std::unique_ptr<victim::Victim<T>> vic;
  detail::ensure_victim(target_spec, ds, opt, vic);

  const auto acfg = parse_attack(target_spec.at("attack"));
  const auto& subset_cfg = target_spec.at("subset");
  const std::uint64_t seed = opt.seed_override ? *opt.seed_override
                                               : target_spec.at("seeds").at(0).get<std::uint64_t>();
  const std::uint64_t subset_seed =
      subset_cfg.contains("seed") ? subset_cfg.at("seed").get<std::uint64_t>() : seed;
  auto subset = data::fixed_test_subset(
      ds.test, std::min<std::size_t>(subset_cfg.value("size", 512), ds.test.size()), subset_seed);
  auto adv = detail::ensure_adv_cache(*vic, ds, subset, acfg, opt);

  const auto t0 = std::chrono::steady_clock::now();
  defender::DefenderDefense<T> defense(def.get());
  auto [ca, aa] = evaluate_ca_aa(*vic, &defense, ds.test, adv);
  const auto t1 = std::chrono::steady_clock::now();

  ResultRow row;
  row.dataset = ds.name;
  row.victim = vic->kind();
  row.defender = "transfer:" + std::filesystem::path(defender_ckpt).stem().string();
  row.attack = acfg.label();
  row.seed = seed;
  row.ca_pct = 100.0 * ca;
  row.aa_pct = 100.0 * aa;
  row.wall_s = opt.timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
  return row;
}

} // namespace plugdef::harness
