#pragma once
// Defense training-set assembly. Labels are the ground truth of the chosen
// origins (the relabeled-examples premise); failed attacks stay in the set
// flagged unless strict redraw is on.
#include <string>
#include <vector>

#include "plugdef/attack.hpp"
#include "plugdef/data.hpp"

namespace plugdef::data {

enum class SampleMode { OneAdv, OneAdvOneClean, KAdv, OneAdvBalanced };

inline std::string to_string(SampleMode m) {
  switch (m) {
    case SampleMode::OneAdv: return "1adv";
    case SampleMode::OneAdvOneClean: return "1adv-1clean";
    case SampleMode::KAdv: return "kadv";
    case SampleMode::OneAdvBalanced: return "1adv-balanced";
  }
  return "?";
}

inline SampleMode sample_mode_from(const std::string& s) {
  if (s == "1adv") return SampleMode::OneAdv;
  if (s == "1adv-1clean") return SampleMode::OneAdvOneClean;
  if (s == "kadv" || s == "4adv") return SampleMode::KAdv;
  if (s == "1adv-balanced") return SampleMode::OneAdvBalanced;
  throw std::invalid_argument("unknown sample mode: " + s);
}

struct SamplerConfig {
  SampleMode mode = SampleMode::OneAdv;
  int k = 4; // shots per class for KAdv
  std::uint64_t seed = 0;
  bool strict_redraw = false; // re-draw origins whose attack failed
};

struct TrainItem {
  std::vector<float> pixels;
  int label = -1;
  bool is_adv = false;
  std::size_t origin = 0;
  bool attack_failed = false;
};

struct DefenseTrainSet {
  std::vector<TrainItem> items;
  // per-origin clean and adversarial views for the training-side metrics
  std::vector<std::vector<float>> clean_eval;
  std::vector<int> clean_labels;
  std::vector<std::vector<float>> adv_eval;
  std::vector<int> adv_labels;
  double failed_attack_rate = 0.0;
  std::vector<std::size_t> origins;
};

template <typename T>
DefenseTrainSet build_defense_trainset(const victim::Victim<T>& m, const attack::AttackConfig& acfg,
                                       const Dataset& train, const SamplerConfig& scfg) {
  if (!m.frozen()) throw std::invalid_argument("build_defense_trainset: victim must be frozen");
  const int classes = train.K;

  std::vector<std::size_t> chosen;
  std::vector<attack::AdversarialExample> advs;
  const auto attack_at = [&](std::size_t idx) {
    return attack::attack_one(m, train.image(idx), idx, train.labels[idx], acfg);
  };

  if (scfg.mode == SampleMode::OneAdvBalanced) {
    if (!scfg.strict_redraw) {
      chosen = nshot_sample(train, 1, scfg.seed);
      for (std::size_t idx : chosen) advs.push_back(attack_at(idx));
    } else {
      // walk each class's shuffled order (same streams as nshot_sample)
      std::vector<std::size_t> picked;
      for (int k = 0; k < classes; ++k) {
        std::vector<std::size_t> cls;
        for (std::size_t i = 0; i < train.size(); ++i)
          if (train.labels[i] == k) cls.push_back(i);
        Rng rng = Rng::from(scfg.seed, "nshot.class." + std::to_string(k));
        rng.shuffle(cls);
        std::size_t use = cls[0];
        attack::AdversarialExample best = attack_at(cls[0]);
        for (std::size_t j = 1; best.attack_failed && j < cls.size(); ++j) {
          auto ex = attack_at(cls[j]);
          if (!ex.attack_failed) {
            best = std::move(ex);
            use = cls[j];
          }
        }
        picked.push_back(use);
        advs.push_back(std::move(best));
      }
      // keep adv aligned with picked through the final mix shuffle
      std::vector<std::size_t> order(picked.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng mix = Rng::from(scfg.seed, "nshot.mix");
      mix.shuffle(order);
      std::vector<attack::AdversarialExample> adv2;
      for (std::size_t i : order) {
        chosen.push_back(picked[i]);
        adv2.push_back(std::move(advs[i]));
      }
      advs = std::move(adv2);
    }
  } else {
    const std::size_t want =
        scfg.mode == SampleMode::KAdv ? std::size_t(scfg.k) * classes : std::size_t(classes);
    const auto perm = random_sample(train, train.size(), scfg.seed);
    for (std::size_t pos = 0; pos < perm.size() && chosen.size() < want; ++pos) {
      if (!scfg.strict_redraw && pos >= want) break;
      auto ex = attack_at(perm[pos]);
      if (scfg.strict_redraw && ex.attack_failed && perm.size() - pos > want - chosen.size())
        continue;
      chosen.push_back(perm[pos]);
      advs.push_back(std::move(ex));
    }
    if (chosen.size() < want)
      throw std::runtime_error("build_defense_trainset: dataset too small for sampler");
  }

  DefenseTrainSet ts;
  ts.origins = chosen;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto& ex = advs[i];
    ts.items.push_back(TrainItem{ex.pixels, ex.true_label, true, ex.origin, ex.attack_failed});
    ts.adv_eval.push_back(ex.pixels);
    ts.adv_labels.push_back(ex.true_label);
    const float* clean = train.image(chosen[i]);
    ts.clean_eval.emplace_back(clean, clean + train.pixels());
    ts.clean_labels.push_back(train.labels[chosen[i]]);
    if (ex.attack_failed) ++failed;
  }
  if (scfg.mode == SampleMode::OneAdvOneClean) {
    for (std::size_t i = 0; i < chosen.size(); ++i)
      ts.items.push_back(
          TrainItem{ts.clean_eval[i], train.labels[chosen[i]], false, chosen[i], false});
  }
  ts.failed_attack_rate = chosen.empty() ? 0.0 : double(failed) / double(chosen.size());
  return ts;
}

} // namespace plugdef::data
