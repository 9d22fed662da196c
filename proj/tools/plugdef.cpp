// Experiment CLI. Subcommands mirror the protocol stages: train-victim,
// gen-adv, tune, eval, transfer, suite, curves, gen-data.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "plugdef/harness.hpp"

using namespace plugdef;
using harness::Options;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::string precision = "f32";
  int threads = 1;
  long long seed = -1;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_config = true) {
  auto* c = cmd->add_option("--config", a.config, "experiment config (json)");
  if (need_config) c->required();
  cmd->add_option("--out", a.out, "output path or directory");
  cmd->add_option("--precision", a.precision, "f32 | f64")->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--threads", a.threads, "kernel worker threads");
  cmd->add_option("--seed", a.seed, "override the config seed list with one seed");
  cmd->add_flag("--timing", a.timing, "emit measured wall seconds (non-reproducible output)");
}

Options make_options(const CommonArgs& a, const std::string& default_store) {
  Options opt;
  opt.store = a.out.empty() ? default_store : a.out;
  opt.threads = a.threads;
  opt.timing = a.timing;
  if (a.seed >= 0) opt.seed_override = std::uint64_t(a.seed);
  kern::set_threads(std::max(1, a.threads));
  return opt;
}

void print_rows(const std::vector<harness::ResultRow>& rows) {
  std::printf("%-12s %-9s %-24s %-10s %-6s %8s %8s\n", "dataset", "victim", "defender", "attack",
              "seed", "ca_pct", "aa_pct");
  for (const auto& r : rows)
    std::printf("%-12s %-9s %-24s %-10s %-6llu %8.2f %8.2f\n", r.dataset.c_str(), r.victim.c_str(),
                r.defender.c_str(), r.attack.c_str(), static_cast<unsigned long long>(r.seed),
                r.ca_pct, r.aa_pct);
}

template <typename T>
int do_suite(const json& spec, const Options& opt) {
  namespace fs = std::filesystem;
  std::vector<json> failures;
  auto rows = harness::run_experiment<T>(spec, opt, "", &failures);
  fs::create_directories(opt.store);
  if (!rows.empty()) {
    harness::emit_results(rows, (fs::path(opt.store) / "results.csv").string(),
                          harness::ResultFormat::Csv);
    harness::emit_results(rows, (fs::path(opt.store) / "results.jsonl").string(),
                          harness::ResultFormat::Jsonl);
  }
  if (!failures.empty()) {
    std::string buf;
    for (const auto& f : failures) buf += f.dump() + "\n";
    io::write_file((fs::path(opt.store) / "failures.jsonl").string(), buf);
  }
  print_rows(rows);
  for (const auto& f : failures) std::fprintf(stderr, "FAILED: %s\n", f.dump().c_str());
  return failures.empty() ? 0 : 1;
}

template <typename T>
int do_train_victim(const json& spec, const Options& opt, const std::string& out) {
  auto ds = harness::resolve_dataset(spec.at("dataset"), opt.store);
  victim::TrainReport rep;
  auto vcfg = harness::parse_victim(spec.at("victim"));
  if (opt.seed_override) vcfg.seed = *opt.seed_override;
  auto vic = victim::train_victim<T>(ds.train, vcfg, &rep);
  victim::save_victim(out, *vic);
  std::printf("victim %s: holdout %.2f%% after %d epochs -> %s\n", vic->kind().c_str(),
              100.0 * rep.holdout_acc, rep.epochs_run, out.c_str());
  return 0;
}

template <typename T>
int do_gen_adv(const json& spec, const Options& opt, const std::string& victim_path,
               const std::string& out) {
  auto ds = harness::resolve_dataset(spec.at("dataset"), opt.store);
  auto vic = victim::load_victim<T>(victim_path);
  const auto acfg = harness::parse_attack(spec.at("attack"));
  const auto& subset_cfg = spec.at("subset");
  const std::uint64_t seed =
      opt.seed_override ? *opt.seed_override : spec.at("seeds").at(0).get<std::uint64_t>();
  const std::uint64_t subset_seed =
      subset_cfg.contains("seed") ? subset_cfg.at("seed").get<std::uint64_t>() : seed;
  auto subset = data::fixed_test_subset(
      ds.test, std::min<std::size_t>(subset_cfg.value("size", 512), ds.test.size()), subset_seed);
  auto corpus = attack::attack_subset(*vic, ds.test, subset, acfg);
  attack::save_corpus(out, corpus);
  std::size_t ok = 0;
  for (const auto& ex : corpus.items) ok += !ex.attack_failed;
  std::printf("%s: %zu examples, %.1f%% successful, max distortion %.6f -> %s\n",
              acfg.label().c_str(), corpus.items.size(), 100.0 * double(ok) / corpus.items.size(),
              [&] {
                double m = 0;
                for (const auto& ex : corpus.items) m = std::max(m, ex.distortion);
                return m;
              }(),
              out.c_str());
  return 0;
}

template <typename T>
int do_tune(const json& spec, const Options& opt, const std::string& arm_name) {
  std::string target = arm_name;
  if (target.empty()) {
    for (const auto& arm : spec.at("defenders"))
      if (arm.value("kind", "defender") == "defender") {
        target = arm.at("name").get<std::string>();
        break;
      }
  }
  if (target.empty()) throw std::runtime_error("no defender arm in config");
  auto rows = harness::run_experiment<T>(spec, opt, target);
  print_rows(rows);
  return 0;
}

template <typename T>
int do_eval(const json& spec, const Options& opt, const std::string& victim_path,
            const std::string& defender_path, const std::string& baseline_spec,
            const std::string& corpus_path, const std::string& out) {
  auto ds = harness::resolve_dataset(spec.at("dataset"), opt.store);
  auto vic = victim::load_victim<T>(victim_path);
  auto corpus = attack::load_corpus(corpus_path);

  std::unique_ptr<defender::Defender<T>> def;
  std::unique_ptr<PixelDefense> defense;
  std::string name = "none";
  const std::uint64_t seed =
      opt.seed_override ? *opt.seed_override : spec.at("seeds").at(0).get<std::uint64_t>();
  if (!defender_path.empty()) {
    def = defender::load_defender<T>(defender_path);
    defense = std::make_unique<defender::DefenderDefense<T>>(def.get());
    name = std::filesystem::path(defender_path).stem().string();
  } else if (!baseline_spec.empty()) {
    name = baseline_spec;
    if (baseline_spec == "rp") {
      defense = std::make_unique<baseline::RpDefense>(baseline::RpConfig{}, seed);
    } else if (baseline_spec.rfind("noise:", 0) == 0) {
      defense = std::make_unique<baseline::NoiseDefense>(std::stod(baseline_spec.substr(6)), seed);
    } else {
      throw std::runtime_error("unknown baseline: " + baseline_spec + " (rp | noise:<std>)");
    }
  }

  auto [ca, aa] = harness::evaluate_ca_aa(*vic, defense.get(), ds.test, corpus);
  harness::ResultRow row{ds.name, vic->kind(), name, corpus.cfg.label(), seed, 100.0 * ca,
                         100.0 * aa, 0.0};
  print_rows({row});
  if (!out.empty()) harness::emit_results({row}, out, harness::ResultFormat::Csv);
  return 0;
}

template <typename T>
int do_transfer(const json& spec, const Options& opt, const std::string& defender_path,
                const std::string& out) {
  auto row = harness::transfer_eval<T>(defender_path, spec, opt);
  print_rows({row});
  if (!out.empty()) harness::emit_results({row}, out, harness::ResultFormat::Csv);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"plug-in defender experiment harness"};
  app.require_subcommand(1);

  CommonArgs suite_args, victim_args, adv_args, tune_args, eval_args, transfer_args, data_args;
  std::string victim_path, defender_path, baseline_spec, corpus_path, arm_name;
  std::string curves_in, curves_out;

  auto* c_suite = app.add_subcommand("suite", "run every (defender, seed) cell of a config");
  add_common(c_suite, suite_args);

  auto* c_victim = app.add_subcommand("train-victim", "train and freeze a service model");
  add_common(c_victim, victim_args);

  auto* c_adv = app.add_subcommand("gen-adv", "attack the fixed test subset and save the corpus");
  add_common(c_adv, adv_args);
  c_adv->add_option("--victim", victim_path, "victim checkpoint")->required();

  auto* c_tune = app.add_subcommand("tune", "tune one defender arm of a config");
  add_common(c_tune, tune_args);
  c_tune->add_option("--arm", arm_name, "defender arm name (default: first)");

  auto* c_eval = app.add_subcommand("eval", "evaluate CA/AA against a saved corpus");
  add_common(c_eval, eval_args);
  c_eval->add_option("--victim", victim_path, "victim checkpoint")->required();
  c_eval->add_option("--defender", defender_path, "tuned defender checkpoint");
  c_eval->add_option("--baseline", baseline_spec, "rp | noise:<std>");
  c_eval->add_option("--corpus", corpus_path, "adversarial corpus")->required();

  auto* c_transfer = app.add_subcommand("transfer", "zero-shot transfer into a target config");
  add_common(c_transfer, transfer_args);
  c_transfer->add_option("--defender", defender_path, "source-tuned defender checkpoint")->required();

  auto* c_curves = app.add_subcommand("curves", "dump a curves.jsonl to csv");
  c_curves->add_option("--in", curves_in, "curves.jsonl")->required();
  c_curves->add_option("--out", curves_out, "csv path")->required();

  auto* c_data = app.add_subcommand("gen-data", "materialize a dataset ref (digits go to IDX files)");
  add_common(c_data, data_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(c_curves)) {
      std::ifstream in(curves_in);
      if (!in) throw std::runtime_error("cannot open " + curves_in);
      auto log = train::CurveLog::from_jsonl(in);
      std::ofstream out(curves_out);
      log.to_csv(out);
      std::printf("%zu epochs -> %s\n", log.rows.size(), curves_out.c_str());
      return 0;
    }

    auto dispatch = [&](const CommonArgs& a, auto&& fn) {
      const json spec = harness::load_config(a.config);
      const Options opt = make_options(a, "runs_out");
      return a.precision == "f64" ? fn.template operator()<double>(spec, opt)
                                  : fn.template operator()<float>(spec, opt);
    };

    if (app.got_subcommand(c_suite)) {
      return dispatch(suite_args, []<typename T>(const json& s, const Options& o) {
        return do_suite<T>(s, o);
      });
    }
    if (app.got_subcommand(c_victim)) {
      if (victim_args.out.empty()) throw std::runtime_error("train-victim requires --out");
      return dispatch(victim_args, [&]<typename T>(const json& s, const Options& o) {
        Options o2 = o;
        o2.store = "runs_out";
        return do_train_victim<T>(s, o2, victim_args.out);
      });
    }
    if (app.got_subcommand(c_adv)) {
      if (adv_args.out.empty()) throw std::runtime_error("gen-adv requires --out");
      return dispatch(adv_args, [&]<typename T>(const json& s, const Options& o) {
        Options o2 = o;
        o2.store = "runs_out";
        return do_gen_adv<T>(s, o2, victim_path, adv_args.out);
      });
    }
    if (app.got_subcommand(c_tune)) {
      return dispatch(tune_args, [&]<typename T>(const json& s, const Options& o) {
        return do_tune<T>(s, o, arm_name);
      });
    }
    if (app.got_subcommand(c_eval)) {
      return dispatch(eval_args, [&]<typename T>(const json& s, const Options& o) {
        Options o2 = o;
        o2.store = "runs_out";
        return do_eval<T>(s, o2, victim_path, defender_path, baseline_spec, corpus_path,
                          eval_args.out);
      });
    }
    if (app.got_subcommand(c_transfer)) {
      return dispatch(transfer_args, [&]<typename T>(const json& s, const Options& o) {
        Options o2 = o;
        o2.store = "runs_out";
        return do_transfer<T>(s, o2, defender_path, transfer_args.out);
      });
    }
    if (app.got_subcommand(c_data)) {
      const json spec = harness::load_config(data_args.config);
      const Options opt = make_options(data_args, data_args.out.empty() ? "runs_out" : data_args.out);
      auto ds = harness::resolve_dataset(spec.at("dataset"), opt.store);
      std::printf("dataset %s: train %zu, test %zu, %dx%dx%d, K=%d\n", ds.name.c_str(),
                  ds.train.size(), ds.test.size(), ds.train.C, ds.train.H, ds.train.W, ds.train.K);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
