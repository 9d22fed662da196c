#pragma once
// Evasion attacks against the frozen victim: FGSM, L_inf/L2 PGD, and a
// simplified Auto-PGD with adaptive step size. Attacks see the bare service
// model only; the defender is never in their gradient path.
#include <cstdint>
#include <string>
#include <vector>

#include "plugdef/victim.hpp"

namespace plugdef::attack {

enum class Norm { Linf, L2 };
enum class Variant { Fgsm, Pgd, Apgd };

struct AttackConfig {
  Norm norm = Norm::Linf;
  double epsilon = 8.0 / 255.0;
  int steps = 10;
  double step_size = 0.0; // <= 0 resolves to epsilon / 4
  Variant variant = Variant::Pgd;
  std::uint64_t seed = 0;
  bool random_start = false;

  double resolved_step_size() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }
  static double default_epsilon(Norm n) { return n == Norm::Linf ? 8.0 / 255.0 : 128.0 / 255.0; }
  std::string label() const;
};

struct AdversarialExample {
  std::vector<float> pixels; // in [0,1], within the epsilon ball of origin
  std::size_t origin = 0;
  int true_label = -1;
  int victim_pred = -1;
  double distortion = 0.0;
  bool zero_grad = false;     // gradient vanished during the attack
  bool attack_failed = false; // victim still predicts the true label
};

double distortion_of(Norm norm, const float* a, const float* b, std::size_t n);

struct AdvCorpus {
  AttackConfig cfg;
  std::uint64_t victim_checksum = 0;
  int C = 0, H = 0, W = 0;
  std::vector<AdversarialExample> items;
};

void save_corpus(const std::string& path, const AdvCorpus& corpus);
AdvCorpus load_corpus(const std::string& path);

namespace detail {

// linf: per-coordinate clamp to [center - eps, center + eps];
// l2: rescale v - center to norm <= eps.
template <typename T>
void project(std::size_t n, T* v, const T* center, Norm norm, double eps) {
  if (norm == Norm::Linf) {
    for (std::size_t i = 0; i < n; ++i) {
      const T lo = center[i] - T(eps);
      const T hi = center[i] + T(eps);
      v[i] = std::min(std::max(v[i], lo), hi);
    }
  } else {
    std::vector<T> delta(n);
    kern::sub(n, v, center, delta.data());
    const double nrm = std::sqrt(double(kern::sumsq(n, delta.data())));
    if (nrm > eps) {
      const T s = T(eps / nrm);
      for (std::size_t i = 0; i < n; ++i) v[i] = center[i] + s * delta[i];
    }
  }
}

template <typename T>
double input_gradient(const victim::Victim<T>& m, const std::vector<T>& x, int label,
                      std::vector<T>& grad_out) {
  auto xt = ad::Tensor<T>::leaf({m.in_c(), m.in_h(), m.in_w()}, x, true);
  auto loss = ad::cross_entropy(m.logits(xt), {label});
  ad::backward(loss);
  grad_out = xt.grad();
  return double(loss.item());
}

template <typename T>
double loss_at(const victim::Victim<T>& m, const std::vector<T>& x, int label) {
  auto xt = ad::Tensor<T>::leaf({m.in_c(), m.in_h(), m.in_w()}, x, false);
  return double(ad::cross_entropy(m.logits(xt), {label}).item());
}

// sign for linf, whole-image l2 normalization (1e-12 floor) otherwise
template <typename T>
void ascent_direction(Norm norm, const std::vector<T>& g, std::vector<T>& dir) {
  dir.resize(g.size());
  if (norm == Norm::Linf) {
    kern::sign(g.size(), g.data(), dir.data());
  } else {
    const double nrm = std::max(std::sqrt(double(kern::sumsq(g.size(), g.data()))), 1e-12);
    kern::scale(g.size(), T(1.0 / nrm), g.data(), dir.data());
  }
}

template <typename T>
AdversarialExample finish(const victim::Victim<T>& m, const float* x0, std::size_t origin, int label,
                          Norm norm, const std::vector<T>& xa, bool zero_grad) {
  AdversarialExample ex;
  ex.pixels.resize(xa.size());
  for (std::size_t i = 0; i < xa.size(); ++i) ex.pixels[i] = static_cast<float>(xa[i]);
  ex.origin = origin;
  ex.true_label = label;
  ex.victim_pred = m.predict_label(ex.pixels.data());
  ex.distortion = distortion_of(norm, ex.pixels.data(), x0, ex.pixels.size());
  ex.zero_grad = zero_grad;
  ex.attack_failed = ex.victim_pred == label;
  return ex;
}

} // namespace detail

// x_a = clip01(x + eps * sign(grad_x CE(M(x), y)))
template <typename T>
AdversarialExample fgsm(const victim::Victim<T>& m, const float* x, std::size_t origin, int label,
                        double eps) {
  const std::size_t n = m.in_pixels();
  std::vector<T> x0(n);
  for (std::size_t i = 0; i < n; ++i) x0[i] = static_cast<T>(x[i]);
  std::vector<T> g;
  detail::input_gradient(m, x0, label, g);
  const bool zero = kern::maxabs(n, g.data()) == T(0);
  std::vector<T> dir(n);
  kern::sign(n, g.data(), dir.data());
  std::vector<T> xa(n);
  for (std::size_t i = 0; i < n; ++i) xa[i] = x0[i] + T(eps) * dir[i];
  kern::clamp(n, xa.data(), T(0), T(1), xa.data());
  return detail::finish(m, x, origin, label, Norm::Linf, xa, zero);
}

// untargeted CE ascent: x_{t+1} = clip01(project(x_t + alpha * dir(g_t)))
template <typename T>
AdversarialExample pgd(const victim::Victim<T>& m, const float* x, std::size_t origin, int label,
                       const AttackConfig& cfg) {
  const std::size_t n = m.in_pixels();
  std::vector<T> x0(n);
  for (std::size_t i = 0; i < n; ++i) x0[i] = static_cast<T>(x[i]);
  std::vector<T> cur = x0;
  if (cfg.random_start) {
    Rng rng = Rng::from(cfg.seed, "pgd.start." + std::to_string(origin));
    for (std::size_t i = 0; i < n; ++i) cur[i] += T(rng.uniform(-cfg.epsilon, cfg.epsilon));
    detail::project(n, cur.data(), x0.data(), cfg.norm, cfg.epsilon);
    kern::clamp(n, cur.data(), T(0), T(1), cur.data());
  }
  const T alpha = T(cfg.resolved_step_size());
  bool zero = false;
  std::vector<T> g, dir;
  for (int t = 0; t < cfg.steps; ++t) {
    detail::input_gradient(m, cur, label, g);
    if (kern::maxabs(n, g.data()) == T(0)) {
      zero = true;
      break;
    }
    detail::ascent_direction(cfg.norm, g, dir);
    for (std::size_t i = 0; i < n; ++i) cur[i] = cur[i] + alpha * dir[i];
    detail::project(n, cur.data(), x0.data(), cfg.norm, cfg.epsilon);
    kern::clamp(n, cur.data(), T(0), T(1), cur.data());
  }
  return detail::finish(m, x, origin, label, cfg.norm, cur, zero);
}

// Momentum PGD starting at alpha = 2*eps. At fixed fractions of the budget
// the step size halves and the search restarts from the best-loss iterate
// unless the loss improved in at least 75% of the interval's steps. Returns
// the best-loss iterate.
template <typename T>
AdversarialExample apgd(const victim::Victim<T>& m, const float* x, std::size_t origin, int label,
                        const AttackConfig& cfg) {
  const std::size_t n = m.in_pixels();
  std::vector<T> x0(n);
  for (std::size_t i = 0; i < n; ++i) x0[i] = static_cast<T>(x[i]);

  // checkpoint schedule: p1 = 0.22, p_{j+1} = p_j + max(p_j - p_{j-1} - 0.03, 0.06)
  std::vector<int> checkpoints;
  {
    double prev = 0.0, curf = 0.22;
    while (curf < 1.0) {
      const int w = static_cast<int>(std::ceil(curf * cfg.steps));
      if (w > 0 && w < cfg.steps && (checkpoints.empty() || w > checkpoints.back()))
        checkpoints.push_back(w);
      const double next = curf + std::max(curf - prev - 0.03, 0.06);
      prev = curf;
      curf = next;
    }
  }

  double alpha = 2.0 * cfg.epsilon;
  std::vector<T> cur = x0, prev = x0;
  std::vector<T> best = x0;
  double best_loss = detail::loss_at(m, x0, label);
  double loss_prev_step = best_loss;
  bool zero = false;
  int improved = 0, interval_len = 0;
  std::size_t next_ckpt = 0;
  std::vector<T> g, dir, z(n), nxt(n);

  for (int t = 0; t < cfg.steps; ++t) {
    double loss_cur;
    if (t == 0) {
      loss_cur = best_loss;
      detail::input_gradient(m, cur, label, g);
    } else {
      loss_cur = detail::input_gradient(m, cur, label, g);
    }
    if (loss_cur > best_loss) {
      best_loss = loss_cur;
      best = cur;
    }
    if (t > 0) {
      ++interval_len;
      if (loss_cur > loss_prev_step) ++improved;
    }
    loss_prev_step = loss_cur;

    if (kern::maxabs(n, g.data()) == T(0)) {
      zero = true;
      break;
    }
    detail::ascent_direction(cfg.norm, g, dir);
    for (std::size_t i = 0; i < n; ++i) z[i] = cur[i] + T(alpha) * dir[i];
    detail::project(n, z.data(), x0.data(), cfg.norm, cfg.epsilon);
    kern::clamp(n, z.data(), T(0), T(1), z.data());
    if (t == 0) {
      nxt = z;
    } else {
      for (std::size_t i = 0; i < n; ++i)
        nxt[i] = cur[i] + T(0.75) * (z[i] - cur[i]) + T(0.25) * (cur[i] - prev[i]);
      detail::project(n, nxt.data(), x0.data(), cfg.norm, cfg.epsilon);
      kern::clamp(n, nxt.data(), T(0), T(1), nxt.data());
    }
    prev = cur;
    cur = nxt;

    if (next_ckpt < checkpoints.size() && t + 1 == checkpoints[next_ckpt]) {
      if (interval_len > 0 && double(improved) < 0.75 * double(interval_len)) {
        alpha *= 0.5;
        cur = best;
        prev = best;
        loss_prev_step = best_loss;
      }
      improved = 0;
      interval_len = 0;
      ++next_ckpt;
    }
  }
  const double final_loss = detail::loss_at(m, cur, label);
  if (final_loss > best_loss) {
    best_loss = final_loss;
    best = cur;
  }
  return detail::finish(m, x, origin, label, cfg.norm, best, zero);
}

template <typename T>
AdversarialExample attack_one(const victim::Victim<T>& m, const float* x, std::size_t origin,
                              int label, const AttackConfig& cfg) {
  switch (cfg.variant) {
    case Variant::Fgsm: return fgsm(m, x, origin, label, cfg.epsilon);
    case Variant::Pgd: return pgd(m, x, origin, label, cfg);
    case Variant::Apgd: return apgd(m, x, origin, label, cfg);
  }
  throw std::logic_error("attack_one: bad variant");
}

template <typename T>
AdvCorpus attack_subset(const victim::Victim<T>& m, const data::Dataset& ds,
                        const std::vector<std::size_t>& idx, const AttackConfig& cfg) {
  AdvCorpus corpus;
  corpus.cfg = cfg;
  corpus.victim_checksum = io::params_checksum(m.params());
  corpus.C = m.in_c();
  corpus.H = m.in_h();
  corpus.W = m.in_w();
  corpus.items.reserve(idx.size());
  for (std::size_t i : idx)
    corpus.items.push_back(attack_one(m, ds.image(i), i, ds.labels[i], cfg));
  return corpus;
}

} // namespace plugdef::attack
