#pragma once
// Defender tuning: cross-entropy over M(D(x)+x) with only theta1 updated via
// Lion, full-epoch curve logging, and cached adversarial test probes.
#include <fstream>
#include <optional>
#include <ostream>

#include "plugdef/defender.hpp"
#include "plugdef/trainset.hpp"

namespace plugdef::train {

using ad::Parameter;
using ad::Tensor;

struct LionConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.0;
};

// u = sign(beta1*m + (1-beta1)*g); p -= lr * (u + wd*p); m = beta2*m + (1-beta2)*g
// sign(0) = 0, so with wd = 0 every coordinate moves by exactly 0 or +-lr.
template <typename T>
class Lion {
 public:
  Lion(std::vector<Parameter<T>*> params, LionConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) m_.emplace_back(p->tensor.size(), T(0));
  }

  std::size_t group_count() const { return params_.size(); }
  std::size_t variable_count() const {
    std::size_t n = 0;
    for (auto* p : params_) n += p->tensor.data().size();
    return n;
  }

  void zero_grad() {
    for (auto* p : params_) p->tensor.zero_grad();
  }

  void step() {
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      auto* p = params_[pi];
      if (!p->trainable) continue; // frozen parameters receive no updates
      const auto* g = p->tensor.grad_if();
      if (!g) continue;
      auto& vals = p->tensor.data();
      auto& m = m_[pi];
      const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
      const T lr = T(cfg_.lr), wd = T(cfg_.weight_decay);
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const T c = b1 * m[i] + (T(1) - b1) * (*g)[i];
        const T u = T((c > T(0)) - (c < T(0)));
        vals[i] -= lr * (u + wd * vals[i]);
        m[i] = b2 * m[i] + (T(1) - b2) * (*g)[i];
      }
    }
  }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<std::vector<T>> m_;
  LionConfig cfg_;
};

struct TuneConfig {
  int epochs = 500;
  int batch = 32;
  LionConfig lion;
  int eval_every = 25; // test-probe cadence; 0 disables test probes
  std::uint64_t seed = 0;
  std::string curves_path;         // stream JSONL per epoch when set
  std::string abort_snapshot_path; // checkpoint target on NaN abort
};

struct CurveRow {
  int epoch = 0;
  double loss = 0.0, train_ca = 0.0, train_aa = 0.0;
  bool has_test = false;
  double test_ca = 0.0, test_aa = 0.0;
};

struct CurveLog {
  std::vector<CurveRow> rows;
  void to_jsonl(std::ostream& os) const;
  static CurveLog from_jsonl(std::istream& is);
  void to_csv(std::ostream& os) const;
};

void append_jsonl_row(std::ostream& os, const CurveRow& r);

struct TuneAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed test subset plus its cached adversarial counterparts, generated once
// against the bare victim and reused across epochs and defenders.
struct EvalContext {
  const data::Dataset* test = nullptr;
  std::vector<std::size_t> subset;
  const attack::AdvCorpus* adv = nullptr;
};

template <typename T>
int predict_defended(const defender::Defender<T>* d, const victim::Victim<T>& m, const float* px) {
  if (!d) return m.predict_label(px);
  std::vector<T> buf(m.in_pixels());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<T>(px[i]);
  auto x = Tensor<T>::leaf({m.in_c(), m.in_h(), m.in_w()}, std::move(buf), false);
  auto lg = m.logits(d->defend(x));
  int best = 0;
  for (int j = 1; j < m.num_classes(); ++j)
    if (lg.data()[j] > lg.data()[best]) best = j;
  return best;
}

// The Figure-3 series at the current parameters: defended train loss, train
// CA (clean counterparts, unseen in tuning), train AA, and at eval cadence
// the defended test CA/AA.
template <typename T>
CurveRow epoch_eval(const defender::Defender<T>& d, const victim::Victim<T>& m,
                    const data::DefenseTrainSet& ts, const EvalContext* ev, int epoch,
                    bool with_test) {
  CurveRow row;
  row.epoch = epoch;
  double loss_acc = 0.0;
  for (const auto& item : ts.items) {
    std::vector<T> buf(item.pixels.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<T>(item.pixels[i]);
    auto x = Tensor<T>::leaf({m.in_c(), m.in_h(), m.in_w()}, std::move(buf), false);
    loss_acc += double(ad::cross_entropy(m.logits(d.defend(x)), {item.label}).item());
  }
  row.loss = loss_acc / double(ts.items.size());

  std::size_t ok = 0;
  for (std::size_t i = 0; i < ts.clean_eval.size(); ++i)
    ok += predict_defended(&d, m, ts.clean_eval[i].data()) == ts.clean_labels[i];
  row.train_ca = double(ok) / double(ts.clean_eval.size());
  ok = 0;
  for (std::size_t i = 0; i < ts.adv_eval.size(); ++i)
    ok += predict_defended(&d, m, ts.adv_eval[i].data()) == ts.adv_labels[i];
  row.train_aa = double(ok) / double(ts.adv_eval.size());

  if (with_test && ev && ev->test) {
    row.has_test = true;
    ok = 0;
    for (std::size_t i : ev->subset)
      ok += predict_defended(&d, m, ev->test->image(i)) == ev->test->labels[i];
    row.test_ca = double(ok) / double(ev->subset.size());
    ok = 0;
    for (const auto& ex : ev->adv->items)
      ok += predict_defended(&d, m, ex.pixels.data()) == ex.true_label;
    row.test_aa = double(ok) / double(ev->adv->items.size());
  }
  return row;
}

// Mini-batch loop over the shuffled trainset; gradients flow through the
// frozen victim into the defender but only theta1 moves. No early stopping.
template <typename T>
CurveLog tune_defender(defender::Defender<T>& d, const victim::Victim<T>& m,
                       const data::DefenseTrainSet& ts, const TuneConfig& cfg,
                       const EvalContext* ev = nullptr) {
  if (!m.frozen()) throw std::invalid_argument("tune_defender: victim must be frozen");
  if (ts.items.empty()) throw std::invalid_argument("tune_defender: empty trainset");
  d.apply_partition();
  auto [theta1, theta2] = d.partition();
  Lion<T> opt(theta1, cfg.lion);

  // pre-converted inputs
  std::vector<std::vector<T>> inputs;
  inputs.reserve(ts.items.size());
  for (const auto& item : ts.items) {
    std::vector<T> buf(item.pixels.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<T>(item.pixels[i]);
    inputs.push_back(std::move(buf));
  }

  std::ofstream curves;
  if (!cfg.curves_path.empty()) {
    curves.open(cfg.curves_path, std::ios::trunc);
    if (!curves) throw std::runtime_error("cannot write " + cfg.curves_path);
  }

  Rng shuffle_rng = Rng::from(cfg.seed, "tune.shuffle");
  std::vector<std::size_t> order(ts.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  CurveLog log;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      opt.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& item = ts.items[order[i]];
        auto x = Tensor<T>::leaf({m.in_c(), m.in_h(), m.in_w()}, inputs[order[i]], false);
        auto loss = ad::cross_entropy(m.logits(d.defend(x)), {item.label});
        batch_loss += double(loss.item());
        ad::backward(ad::scale(loss, T(1) / T(end - start)));
      }
      if (std::isnan(batch_loss)) {
        if (!cfg.abort_snapshot_path.empty()) defender::save_defender(cfg.abort_snapshot_path, d);
        throw TuneAbort("NaN loss at epoch " + std::to_string(epoch) + ", batch at offset " +
                        std::to_string(start) +
                        (cfg.abort_snapshot_path.empty() ? "" : "; snapshot: " + cfg.abort_snapshot_path));
      }
      opt.step();
    }
    const bool with_test = ev && cfg.eval_every > 0 &&
                           (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    CurveRow row = epoch_eval(d, m, ts, ev, epoch, with_test);
    if (curves.is_open()) append_jsonl_row(curves, row);
    log.rows.push_back(row);
  }
  return log;
}

} // namespace plugdef::train
