#pragma once
// Frozen service models under attack: a miniature ViT classifier and an MLP
// classifier trained locally. Forward passes are deterministic; once a model
// is deployed its parameters never change again.
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "plugdef/data.hpp"
#include "plugdef/defense.hpp"
#include "plugdef/nn.hpp"
#include "plugdef/serialize.hpp"

namespace plugdef::victim {

using ad::Parameter;
using ad::Tensor;

struct TrainingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VitArch {
  int patch = 8, dim = 64, layers = 4, heads = 4;
};

struct MlpArch {
  std::vector<int> hidden = {256, 128};
};

template <typename T>
class Victim {
 public:
  Victim(int classes, int c, int h, int w) : classes_(classes), c_(c), h_(h), w_(w) {}
  virtual ~Victim() = default;

  virtual Tensor<T> logits(const Tensor<T>& image) const = 0; // [1, K]
  virtual std::string kind() const = 0;
  virtual std::map<std::string, std::string> config_map() const = 0;

  const std::vector<Parameter<T>*>& params() const { return params_; }
  std::vector<Parameter<T>*>& params() { return params_; }

  int num_classes() const { return classes_; }
  int in_c() const { return c_; }
  int in_h() const { return h_; }
  int in_w() const { return w_; }
  std::size_t in_pixels() const { return std::size_t(c_) * h_ * w_; }

  bool frozen() const { return frozen_; }
  void freeze() {
    for (auto* p : params_) p->set_trainable(false);
    frozen_ = true;
  }

  Tensor<T> image_tensor(const float* px, bool requires_grad = false) const {
    std::vector<T> d(in_pixels());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(px[i]);
    return Tensor<T>::leaf({c_, h_, w_}, std::move(d), requires_grad);
  }

  std::vector<T> predict_logits(const float* px) const {
    auto out = logits(image_tensor(px));
    return out.data();
  }

  // argmax with ties resolved to the lowest index
  int predict_label(const float* px) const {
    const auto lg = predict_logits(px);
    int best = 0;
    for (int j = 1; j < classes_; ++j)
      if (lg[j] > lg[best]) best = j;
    return best;
  }

 protected:
  std::vector<Parameter<T>*> params_;
  int classes_, c_, h_, w_;
  bool frozen_ = false;
};

template <typename T>
class TinyVit final : public Victim<T> {
 public:
  TinyVit(const VitArch& arch, int classes, int c, int h, int w, std::uint64_t seed)
      : Victim<T>(classes, c, h, w), arch_(arch) {
    Rng rng = Rng::from(seed, "victim.init");
    embed_.patch = arch.patch;
    embed_.in_ch = c;
    embed_.dim = arch.dim;
    embed_.img_h = h;
    embed_.img_w = w;
    embed_.build("embed", rng);
    layers_.resize(arch.layers);
    for (int l = 0; l < arch.layers; ++l) {
      layers_[l].dim = arch.dim;
      layers_[l].heads = arch.heads;
      layers_[l].build("layer" + std::to_string(l), rng);
    }
    final_g_ = nn::make_param("final_ln.gamma", "layer_norm", Tensor<T>::full({arch.dim}, T(1), true));
    final_b_ = nn::make_param("final_ln.beta", "layer_norm", Tensor<T>::zeros({arch.dim}, true));
    head_.build("head", "head", classes, arch.dim, rng);
    embed_.collect(this->params_);
    for (auto& l : layers_) l.collect(this->params_);
    this->params_.push_back(&final_g_);
    this->params_.push_back(&final_b_);
    head_.collect(this->params_);
  }

  Tensor<T> logits(const Tensor<T>& image) const override {
    auto tok = embed_.forward(image);
    tok = nn::transformer_forward(tok, layers_);
    tok = ad::layer_norm_rows(tok, final_g_.tensor, final_b_.tensor, T(1e-5));
    return head_.forward(ad::mean_rows(tok)); // token mean pooling, no class token
  }

  std::string kind() const override { return "tiny-vit"; }

  std::map<std::string, std::string> config_map() const override {
    return {{"patch", std::to_string(arch_.patch)}, {"dim", std::to_string(arch_.dim)},
            {"layers", std::to_string(arch_.layers)}, {"heads", std::to_string(arch_.heads)},
            {"classes", std::to_string(this->classes_)}, {"c", std::to_string(this->c_)},
            {"h", std::to_string(this->h_)}, {"w", std::to_string(this->w_)}};
  }

 private:
  VitArch arch_;
  nn::PatchEmbedding<T> embed_;
  std::vector<nn::TransformerLayer<T>> layers_;
  Parameter<T> final_g_, final_b_;
  nn::LinearBlock<T> head_;
};

template <typename T>
class MlpVictim final : public Victim<T> {
 public:
  MlpVictim(const MlpArch& arch, int classes, int c, int h, int w, std::uint64_t seed)
      : Victim<T>(classes, c, h, w), arch_(arch) {
    Rng rng = Rng::from(seed, "victim.init");
    int in = static_cast<int>(this->in_pixels());
    for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
      fcs_.emplace_back();
      fcs_.back().build("fc" + std::to_string(i), "mlp", arch.hidden[i], in, rng, 0.05);
      in = arch.hidden[i];
    }
    fcs_.emplace_back();
    fcs_.back().build("head", "mlp", classes, in, rng, 0.05);
    for (auto& f : fcs_) f.collect(this->params_);
  }

  Tensor<T> logits(const Tensor<T>& image) const override {
    auto x = ad::reshape(image, {1, static_cast<int>(this->in_pixels())});
    for (std::size_t i = 0; i + 1 < fcs_.size(); ++i) x = ad::relu(fcs_[i].forward(x));
    return fcs_.back().forward(x);
  }

  std::string kind() const override { return "mlp"; }

  std::map<std::string, std::string> config_map() const override {
    std::string hidden;
    for (std::size_t i = 0; i < arch_.hidden.size(); ++i)
      hidden += (i ? "," : "") + std::to_string(arch_.hidden[i]);
    return {{"hidden", hidden}, {"classes", std::to_string(this->classes_)},
            {"c", std::to_string(this->c_)}, {"h", std::to_string(this->h_)},
            {"w", std::to_string(this->w_)}};
  }

 private:
  MlpArch arch_;
  std::vector<nn::LinearBlock<T>> fcs_;
};

// Adam with bias correction; the local stand-in victims train with it.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, double lr, double b1 = 0.9, double b2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->tensor.size(), T(0));
      v_.emplace_back(p->tensor.size(), T(0));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      auto* p = params_[pi];
      if (!p->trainable) continue;
      const auto* g = p->tensor.grad_if();
      if (!g) continue;
      auto& vals = p->tensor.data();
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < vals.size(); ++i) {
        m[i] = T(b1_) * m[i] + T(1.0 - b1_) * (*g)[i];
        v[i] = T(b2_) * v[i] + T(1.0 - b2_) * (*g)[i] * (*g)[i];
        const double mh = double(m[i]) / bc1;
        const double vh = double(v[i]) / bc2;
        vals[i] -= T(lr_ * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->tensor.zero_grad();
  }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<std::vector<T>> m_, v_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

struct VictimTrainConfig {
  std::string kind = "tiny-vit"; // "tiny-vit" | "mlp"
  VitArch vit;
  MlpArch mlp;
  int epochs = 12;
  int batch = 64;
  double lr = 1e-3;
  double floor = 0.95;
  double holdout_frac = 0.1;
  std::uint64_t seed = 1;
};

template <typename T>
std::unique_ptr<Victim<T>> build_victim(const std::string& kind, const VitArch& vit, const MlpArch& mlp,
                                        int classes, int c, int h, int w, std::uint64_t seed) {
  if (kind == "tiny-vit") return std::make_unique<TinyVit<T>>(vit, classes, c, h, w, seed);
  if (kind == "mlp") return std::make_unique<MlpVictim<T>>(mlp, classes, c, h, w, seed);
  throw std::invalid_argument("unknown victim kind: " + kind);
}

template <typename T>
double accuracy(const Victim<T>& m, const data::Dataset& ds, const std::vector<std::size_t>& idx,
                const PixelDefense* defense = nullptr) {
  if (idx.empty()) throw std::invalid_argument("accuracy: empty subset");
  if (ds.C != m.in_c() || ds.H != m.in_h() || ds.W != m.in_w())
    throw std::invalid_argument("accuracy: dataset/victim geometry mismatch");
  std::size_t correct = 0;
  for (std::size_t i : idx) {
    const float* px = ds.image(i);
    int pred;
    if (defense) {
      const auto defended = defense->apply(px, ds.C, ds.H, ds.W, i);
      pred = m.predict_label(defended.data());
    } else {
      pred = m.predict_label(px);
    }
    if (pred == ds.labels[i]) ++correct;
  }
  return double(correct) / double(idx.size());
}

template <typename T>
double accuracy_images(const Victim<T>& m, const std::vector<std::vector<float>>& images,
                       const std::vector<int>& labels, const PixelDefense* defense = nullptr,
                       const std::vector<std::size_t>* indices = nullptr) {
  if (images.empty()) throw std::invalid_argument("accuracy: empty subset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const float* px = images[i].data();
    const std::size_t ridx = indices ? (*indices)[i] : i;
    int pred;
    if (defense) {
      const auto defended = defense->apply(px, m.in_c(), m.in_h(), m.in_w(), ridx);
      pred = m.predict_label(defended.data());
    } else {
      pred = m.predict_label(px);
    }
    if (pred == labels[i]) ++correct;
  }
  return double(correct) / double(images.size());
}

struct TrainReport {
  int epochs_run = 0;
  double holdout_acc = 0.0;
};

// Mini-batch Adam with early stop at the accuracy floor. Returns a frozen
// model or throws TrainingFailure when the budget runs out below the floor.
template <typename T>
std::unique_ptr<Victim<T>> train_victim(const data::Dataset& train, const VictimTrainConfig& cfg,
                                        TrainReport* report = nullptr) {
  if (cfg.epochs <= 0) throw TrainingFailure("train_victim: zero-epoch budget");
  train.validate();
  auto model = build_victim<T>(cfg.kind, cfg.vit, cfg.mlp, train.K, train.C, train.H, train.W, cfg.seed);

  Rng split_rng = Rng::from(cfg.seed, "victim.split");
  auto perm = split_rng.permutation(train.size());
  const std::size_t n_hold = std::max<std::size_t>(1, std::size_t(cfg.holdout_frac * double(train.size())));
  std::vector<std::size_t> holdout(perm.begin(), perm.begin() + n_hold);
  std::vector<std::size_t> fit(perm.begin() + n_hold, perm.end());

  std::vector<Parameter<T>*> trainable = model->params();
  Adam<T> opt(trainable, cfg.lr);
  Rng shuffle_rng = Rng::from(cfg.seed, "victim.shuffle");

  TrainReport rep;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(fit);
    for (std::size_t start = 0; start < fit.size(); start += cfg.batch) {
      const std::size_t end = std::min(fit.size(), start + cfg.batch);
      opt.zero_grad();
      const T inv = T(1) / T(end - start);
      for (std::size_t i = start; i < end; ++i) {
        auto x = model->image_tensor(train.image(fit[i]));
        auto loss = ad::scale(ad::cross_entropy(model->logits(x), {train.labels[fit[i]]}), inv);
        ad::backward(loss);
      }
      opt.step();
    }
    rep.epochs_run = epoch;
    rep.holdout_acc = accuracy(*model, train, holdout);
    if (rep.holdout_acc >= cfg.floor) break;
  }
  if (report) *report = rep;
  if (rep.holdout_acc < cfg.floor)
    throw TrainingFailure("train_victim: holdout accuracy " + std::to_string(rep.holdout_acc) +
                          " below floor " + std::to_string(cfg.floor) + " after " +
                          std::to_string(rep.epochs_run) + " epochs");
  model->freeze();
  return model;
}

template <typename T>
void save_victim(const std::string& path, const Victim<T>& m) {
  io::CheckpointHeader h;
  h.kind = m.kind();
  h.config = m.config_map();
  save_checkpoint(path, h, io::entries_from_params(m.params()));
}

template <typename T>
std::unique_ptr<Victim<T>> load_victim(const std::string& path) {
  auto [h, entries] = io::load_checkpoint(path);
  const auto get = [&](const char* k) {
    auto it = h.config.find(k);
    if (it == h.config.end()) throw std::runtime_error("victim checkpoint: missing config key " + std::string(k));
    return std::stoi(it->second);
  };
  std::unique_ptr<Victim<T>> m;
  if (h.kind == "tiny-vit") {
    VitArch a{get("patch"), get("dim"), get("layers"), get("heads")};
    m = std::make_unique<TinyVit<T>>(a, get("classes"), get("c"), get("h"), get("w"), 0);
  } else if (h.kind == "mlp") {
    MlpArch a;
    a.hidden.clear();
    std::string s = h.config.at("hidden");
    for (std::size_t pos = 0; pos < s.size();) {
      auto comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      a.hidden.push_back(std::stoi(s.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    m = std::make_unique<MlpVictim<T>>(a, get("classes"), get("c"), get("h"), get("w"), 0);
  } else {
    throw std::runtime_error("victim checkpoint: unknown kind " + h.kind);
  }
  io::load_params(entries, m->params());
  m->freeze();
  return m;
}

} // namespace plugdef::victim
