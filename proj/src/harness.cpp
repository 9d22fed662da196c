#include "plugdef/harness.hpp"

#include <fstream>
#include <sstream>

namespace plugdef::harness {

namespace fs = std::filesystem;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  in >> j;
  return j;
}

double parse_epsilon(const json& v) {
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  const auto slash = s.find('/');
  if (slash == std::string::npos) return std::stod(s);
  return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
}

std::uint64_t spec_hash(const json& spec) {
  const std::string dump = spec.dump(); // keys sorted, deterministic
  return fnv1a64(dump.data(), dump.size());
}

std::string hash_hex(std::uint64_t h, int digits) {
  static const char* hex = "0123456789abcdef";
  std::string s(digits, '0');
  for (int i = digits - 1; i >= 0; --i) {
    s[i] = hex[h & 0xf];
    h >>= 4;
  }
  return s;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

} // namespace

void emit_results(const std::vector<ResultRow>& rows, const std::string& path, ResultFormat fmt) {
  if (rows.empty()) throw std::invalid_argument("emit_results: no rows");
  std::ostringstream os;
  if (fmt == ResultFormat::Csv) {
    os << "dataset,victim,defender,attack,seed,ca_pct,aa_pct,wall_s\n";
    for (const auto& r : rows)
      os << r.dataset << "," << r.victim << "," << r.defender << "," << r.attack << "," << r.seed
         << "," << pct(r.ca_pct) << "," << pct(r.aa_pct) << "," << pct(r.wall_s) << "\n";
  } else {
    for (const auto& r : rows) {
      json j{{"dataset", r.dataset}, {"victim", r.victim},   {"defender", r.defender},
             {"attack", r.attack},   {"seed", r.seed},       {"ca_pct", r.ca_pct},
             {"aa_pct", r.aa_pct},   {"wall_s", r.wall_s}};
      os << j.dump() << "\n";
    }
  }
  io::write_file(path, os.str());
}

std::vector<ResultRow> parse_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "dataset,victim,defender,attack,seed,ca_pct,aa_pct,wall_s")
    throw std::runtime_error("results csv: bad header in " + path);
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ResultRow r;
    std::string seed, ca, aa, wall;
    std::getline(ss, r.dataset, ',');
    std::getline(ss, r.victim, ',');
    std::getline(ss, r.defender, ',');
    std::getline(ss, r.attack, ',');
    std::getline(ss, seed, ',');
    std::getline(ss, ca, ',');
    std::getline(ss, aa, ',');
    std::getline(ss, wall, ',');
    r.seed = std::stoull(seed);
    r.ca_pct = std::stod(ca);
    r.aa_pct = std::stod(aa);
    r.wall_s = std::stod(wall);
    rows.push_back(std::move(r));
  }
  return rows;
}

DatasetPair resolve_dataset(const json& cfg, const std::string& store) {
  DatasetPair out;
  out.name = cfg.value("name", std::string("dataset"));
  const std::string kind = cfg.at("kind").get<std::string>();
  const int pad_to = cfg.value("pad_to", 32);
  const int channels = cfg.value("channels", 3);

  if (kind == "digits") {
    data::DigitsSpec train_spec{cfg.value("train_count", 10000), cfg.value("contrast", 1.0)};
    data::DigitsSpec test_spec{cfg.value("test_count", 1000), cfg.value("contrast", 1.0)};
    const std::uint64_t strain = cfg.value("seed_train", 7);
    const std::uint64_t stest = cfg.value("seed_test", 8);
    if (cfg.value("via_idx", true)) {
      // materialize as IDX files so every run exercises the parser
      const auto dir = fs::path(store) / "data";
      fs::create_directories(dir);
      auto pair_path = [&](const char* split, const char* what) {
        return (dir / (out.name + "-" + split + "-" + what + "-idx-ubyte")).string();
      };
      if (!fs::exists(pair_path("train", "images")))
        data::write_digits_idx(train_spec, strain, pair_path("train", "images"),
                               pair_path("train", "labels"));
      if (!fs::exists(pair_path("test", "images")))
        data::write_digits_idx(test_spec, stest, pair_path("test", "images"),
                               pair_path("test", "labels"));
      out.train = data::load_idx(pair_path("train", "images"), pair_path("train", "labels"));
      out.test = data::load_idx(pair_path("test", "images"), pair_path("test", "labels"));
    } else {
      out.train = data::gen_digits(train_spec, strain);
      out.test = data::gen_digits(test_spec, stest);
    }
    out.train = data::conventionize(out.train, pad_to, channels);
    out.test = data::conventionize(out.test, pad_to, channels);
  } else if (kind == "synthetic") {
    data::SyntheticSpec spec;
    spec.classes = cfg.value("classes", 10);
    spec.height = cfg.value("height", 32);
    spec.width = cfg.value("width", 32);
    spec.count = cfg.value("train_count", 2000);
    out.train = data::gen_synthetic(spec, cfg.value("seed_train", 9));
    spec.count = cfg.value("test_count", 1000);
    out.test = data::gen_synthetic(spec, cfg.value("seed_test", 10));
  } else if (kind == "idx") {
    out.train = data::load_idx(cfg.at("train_images").get<std::string>(),
                               cfg.at("train_labels").get<std::string>());
    out.test = data::load_idx(cfg.at("test_images").get<std::string>(),
                              cfg.at("test_labels").get<std::string>());
    out.train = data::conventionize(out.train, pad_to, channels);
    out.test = data::conventionize(out.test, pad_to, channels);
  } else {
    throw std::invalid_argument("unknown dataset kind: " + kind);
  }
  out.train.name = out.name;
  out.test.name = out.name;
  out.train.validate();
  out.test.validate();
  return out;
}

victim::VictimTrainConfig parse_victim(const json& cfg) {
  victim::VictimTrainConfig v;
  v.kind = cfg.value("kind", std::string("tiny-vit"));
  v.vit.patch = cfg.value("patch", 8);
  v.vit.dim = cfg.value("dim", 64);
  v.vit.layers = cfg.value("layers", 4);
  v.vit.heads = cfg.value("heads", 4);
  if (cfg.contains("hidden")) v.mlp.hidden = cfg.at("hidden").get<std::vector<int>>();
  v.epochs = cfg.value("epochs", 12);
  v.batch = cfg.value("batch", 64);
  v.lr = cfg.value("lr", 1e-3);
  v.floor = cfg.value("floor", 0.95);
  v.holdout_frac = cfg.value("holdout_frac", 0.1);
  v.seed = cfg.value("seed", 1);
  return v;
}

attack::AttackConfig parse_attack(const json& cfg) {
  attack::AttackConfig a;
  const std::string norm = cfg.value("norm", std::string("linf"));
  a.norm = norm == "l2" ? attack::Norm::L2 : attack::Norm::Linf;
  const std::string variant = cfg.value("variant", std::string("pgd"));
  a.variant = variant == "fgsm" ? attack::Variant::Fgsm
                                : (variant == "apgd" ? attack::Variant::Apgd : attack::Variant::Pgd);
  a.epsilon = cfg.contains("epsilon") ? parse_epsilon(cfg.at("epsilon"))
                                      : attack::AttackConfig::default_epsilon(a.norm);
  a.steps = cfg.value("steps", 10);
  a.step_size = cfg.contains("step_size") ? parse_epsilon(cfg.at("step_size")) : 0.0;
  a.seed = cfg.value("seed", 0);
  a.random_start = cfg.value("random_start", false);
  return a;
}

data::SamplerConfig parse_sampler(const json& cfg, std::uint64_t run_seed) {
  data::SamplerConfig s;
  s.mode = data::sample_mode_from(cfg.value("mode", std::string("1adv")));
  s.k = cfg.value("k", 4);
  s.seed = cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : run_seed;
  s.strict_redraw = cfg.value("strict_redraw", false);
  return s;
}

train::TuneConfig parse_tune(const json& cfg, std::uint64_t run_seed) {
  train::TuneConfig t;
  t.epochs = cfg.value("epochs", 500);
  t.batch = cfg.value("batch", 32);
  t.lion.lr = cfg.value("lr", 1e-4);
  t.lion.beta1 = cfg.value("beta1", 0.9);
  t.lion.beta2 = cfg.value("beta2", 0.99);
  t.lion.weight_decay = cfg.value("weight_decay", 0.0);
  t.eval_every = cfg.value("eval_every", 25);
  t.seed = cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : run_seed;
  return t;
}

defender::DefenderConfig parse_defender_arm(const json& arm, const data::Dataset& geometry) {
  defender::DefenderConfig d;
  d.in_c = geometry.C;
  d.in_h = geometry.H;
  d.in_w = geometry.W;
  d.patch = arm.value("patch", 8);
  d.dim = arm.value("dim", 192);
  d.layers = arm.value("layers", 4);
  d.heads = arm.value("heads", 4);
  d.causal = arm.value("causal", false);
  d.pre_norm = arm.value("pre_norm", true);
  d.processor = defender::processor_kind_from(arm.value("processor", std::string("transformer")));
  d.hidden = arm.value("hidden", 0);
  d.policy = defender::partition_policy_from(arm.value("policy", std::string("layer-norm-only")));
  d.embed_ln = arm.value("embed_ln", false);
  d.embed_ln_in_theta1 = arm.value("embed_ln_in_theta1", false);
  d.with_residual = arm.value("with_residual", true);
  if (arm.contains("init")) {
    const auto& init = arm.at("init");
    const std::string k = init.value("kind", std::string("random"));
    d.init.kind = k == "proxy" ? defender::InitStrategy::Kind::ProxyPretrained
                               : (k == "checkpoint" ? defender::InitStrategy::Kind::Checkpoint
                                                    : defender::InitStrategy::Kind::Random);
    d.init.seed = init.value("seed", 0);
    d.init.steps = init.value("steps", 0);
    d.init.path = init.value("path", std::string());
    if (init.contains("corpus") && init.at("corpus").is_object())
      d.init.corpus = init.at("corpus").value("name", std::string("corpus"));
  }
  return d;
}

} // namespace plugdef::harness
