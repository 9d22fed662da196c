#pragma once
// The plug-in defender: patch embedding -> pluggable processor ->
// parameter-free PixelShuffle decoder, added residually to the input before
// the frozen victim. A partition policy selects the tuned subset theta1;
// with the layer-norm-only policy that is exactly the processor's gamma/beta
// vectors (4 per transformer layer).
#include <memory>
#include <string>
#include <vector>

#include "plugdef/data.hpp"
#include "plugdef/defense.hpp"
#include "plugdef/nn.hpp"
#include "plugdef/serialize.hpp"
#include "plugdef/victim.hpp"

namespace plugdef::defender {

using ad::Parameter;
using ad::Tensor;

enum class ProcessorKind { Transformer, Linear, Ffn, Bottleneck, Fd };
enum class PartitionPolicy { LayerNormOnly, All, None };

std::string to_string(ProcessorKind k);
ProcessorKind processor_kind_from(const std::string& s);
std::string to_string(PartitionPolicy p);
PartitionPolicy partition_policy_from(const std::string& s);

struct InitStrategy {
  enum class Kind { Random, ProxyPretrained, Checkpoint };
  Kind kind = Kind::Random;
  std::uint64_t seed = 0;
  std::string corpus; // proxy-pretrain corpus ref, resolved by the harness
  int steps = 0;      // proxy-pretrain steps
  std::string path;   // checkpoint path

  std::string descriptor() const {
    switch (kind) {
      case Kind::Random: return "random(" + std::to_string(seed) + ")";
      case Kind::ProxyPretrained:
        return "proxy(" + corpus + "," + std::to_string(steps) + "," + std::to_string(seed) + ")";
      case Kind::Checkpoint: return "checkpoint(" + path + ")";
    }
    return "?";
  }
};

struct DefenderConfig {
  int in_c = 3, in_h = 32, in_w = 32;
  int patch = 8; // also the decoder upscale factor
  int dim = 192;
  int layers = 4;
  int heads = 4;
  bool causal = false;   // decoder-style attention variant
  bool pre_norm = true;  // false -> post-norm arrangement
  ProcessorKind processor = ProcessorKind::Transformer;
  int hidden = 0; // ffn/bottleneck/fd hidden override; 0 -> kind default
  PartitionPolicy policy = PartitionPolicy::LayerNormOnly;
  bool embed_ln = false;           // embedding carries a terminal layer norm
  bool embed_ln_in_theta1 = false; // and it counts toward theta1
  bool with_residual = true;
  InitStrategy init;

  int resolved_hidden() const {
    if (hidden > 0) return hidden;
    switch (processor) {
      case ProcessorKind::Ffn: return 2 * dim;
      case ProcessorKind::Bottleneck: return std::max(1, dim / 2);
      case ProcessorKind::Fd: return dim;
      default: return 0;
    }
  }
};

template <typename T>
class Processor {
 public:
  virtual ~Processor() = default;
  virtual Tensor<T> forward(const Tensor<T>& tokens) const = 0;
  virtual void collect(std::vector<Parameter<T>*>& out) = 0;
};

template <typename T>
class TransformerProcessor final : public Processor<T> {
 public:
  TransformerProcessor(int layers, int dim, int heads, bool pre_norm, bool causal, Rng& rng) {
    layers_.resize(layers);
    for (int l = 0; l < layers; ++l) {
      layers_[l].dim = dim;
      layers_[l].heads = heads;
      layers_[l].pre_norm = pre_norm;
      layers_[l].causal = causal;
      layers_[l].build("proc.layer" + std::to_string(l), rng);
    }
  }
  Tensor<T> forward(const Tensor<T>& tokens) const override {
    return nn::transformer_forward(tokens, layers_);
  }
  void collect(std::vector<Parameter<T>*>& out) override {
    for (auto& l : layers_) l.collect(out);
  }

 private:
  std::vector<nn::TransformerLayer<T>> layers_;
};

template <typename T>
class LinearProcessor final : public Processor<T> {
 public:
  LinearProcessor(int dim, Rng& rng) { fc_.build("proc.linear", "proc", dim, dim, rng); }
  Tensor<T> forward(const Tensor<T>& tokens) const override { return fc_.forward(tokens); }
  void collect(std::vector<Parameter<T>*>& out) override { fc_.collect(out); }

 private:
  nn::LinearBlock<T> fc_;
};

template <typename T>
class FfnProcessor final : public Processor<T> {
 public:
  FfnProcessor(int dim, int hidden, Rng& rng) { blk_.build("proc.ffn", "proc", dim, hidden, rng); }
  Tensor<T> forward(const Tensor<T>& tokens) const override { return blk_.forward(tokens); }
  void collect(std::vector<Parameter<T>*>& out) override { blk_.collect(out); }

 private:
  nn::FfnBlock<T> blk_;
};

// Non-local denoising: affinity = softmax of token dot products, value
// mixing, a per-token 1x1 channel mix, and an identity skip.
template <typename T>
class FdProcessor final : public Processor<T> {
 public:
  FdProcessor(int dim, int hidden, Rng& rng) {
    wv_.build("proc.fd.value", "proc", hidden, dim, rng);
    mix_.build("proc.fd.mix", "proc", dim, hidden, rng);
  }
  Tensor<T> forward(const Tensor<T>& tokens) const override {
    auto affinity = ad::softmax_rows(ad::matmul(tokens, tokens, false, true)); // [T,T]
    auto mixed = ad::matmul(affinity, wv_.forward(tokens));                    // [T,hidden]
    return ad::add(tokens, mix_.forward(mixed));
  }
  void collect(std::vector<Parameter<T>*>& out) override {
    wv_.collect(out);
    mix_.collect(out);
  }

 private:
  nn::LinearBlock<T> wv_, mix_;
};

template <typename T>
class Defender {
 public:
  Defender(const DefenderConfig& cfg, std::uint64_t build_seed) : cfg_(cfg) {
    if (cfg.in_h % cfg.patch != 0 || cfg.in_w % cfg.patch != 0)
      throw std::invalid_argument("defender: image dims must be divisible by patch size");
    if (cfg.dim < cfg.in_c * cfg.patch * cfg.patch)
      throw std::invalid_argument("defender: token dim " + std::to_string(cfg.dim) +
                                  " < C*r^2 = " + std::to_string(cfg.in_c * cfg.patch * cfg.patch));
    Rng rng = Rng::from(build_seed, "defender.init");
    embed_.patch = cfg.patch;
    embed_.in_ch = cfg.in_c;
    embed_.dim = cfg.dim;
    embed_.img_h = cfg.in_h;
    embed_.img_w = cfg.in_w;
    embed_.has_ln = cfg.embed_ln;
    embed_.build("embed", rng);
    switch (cfg.processor) {
      case ProcessorKind::Transformer:
        proc_ = std::make_unique<TransformerProcessor<T>>(cfg.layers, cfg.dim, cfg.heads, cfg.pre_norm,
                                                          cfg.causal, rng);
        break;
      case ProcessorKind::Linear:
        proc_ = std::make_unique<LinearProcessor<T>>(cfg.dim, rng);
        break;
      case ProcessorKind::Ffn:
      case ProcessorKind::Bottleneck:
        proc_ = std::make_unique<FfnProcessor<T>>(cfg.dim, cfg.resolved_hidden(), rng);
        break;
      case ProcessorKind::Fd:
        proc_ = std::make_unique<FdProcessor<T>>(cfg.dim, cfg.resolved_hidden(), rng);
        break;
    }
    dec_.upscale = cfg.patch;
    dec_.out_ch = cfg.in_c;
    embed_.collect(params_);
    proc_->collect(params_);
    apply_partition();
  }

  const DefenderConfig& config() const { return cfg_; }
  int grid_h() const { return cfg_.in_h / cfg_.patch; }
  int grid_w() const { return cfg_.in_w / cfg_.patch; }
  int tokens() const { return grid_h() * grid_w(); }

  std::vector<Parameter<T>*>& params() { return params_; }
  const std::vector<Parameter<T>*>& params() const { return params_; }

  void set_zero_decoder_input(bool z) { zero_decoder_input_ = z; }
  bool zero_decoder_input() const { return zero_decoder_input_; }

  // staged pipeline, exposed for pretraining and for oracle tests
  Tensor<T> embed_forward(const Tensor<T>& x) const { return embed_.forward(x); }
  Tensor<T> process_forward(const Tensor<T>& tok) const { return proc_->forward(tok); }
  Tensor<T> decode_forward(const Tensor<T>& h) const { return dec_.forward(h, grid_h(), grid_w()); }

  // x + decode(process(embed(x))); no output clipping
  Tensor<T> defend(const Tensor<T>& x) const {
    if (x.shape() != ad::Shape{cfg_.in_c, cfg_.in_h, cfg_.in_w})
      throw std::invalid_argument("defend: input shape mismatch, got " + ad::shape_str(x.shape()));
    auto tok = embed_.forward(x);
    auto h = proc_->forward(tok);
    if (zero_decoder_input_) h = Tensor<T>::zeros(h.shape());
    auto feat = dec_.forward(h, grid_h(), grid_w());
    return cfg_.with_residual ? ad::add(x, feat) : feat;
  }

  std::vector<float> defend_pixels(const float* x) const {
    std::vector<T> d(std::size_t(cfg_.in_c) * cfg_.in_h * cfg_.in_w);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(x[i]);
    auto out = defend(Tensor<T>::leaf({cfg_.in_c, cfg_.in_h, cfg_.in_w}, std::move(d), false));
    std::vector<float> res(out.data().size());
    for (std::size_t i = 0; i < res.size(); ++i) res[i] = static_cast<float>(out.data()[i]);
    return res;
  }

  bool in_theta1(const Parameter<T>& p) const {
    switch (cfg_.policy) {
      case PartitionPolicy::All: return true;
      case PartitionPolicy::None: return false;
      case PartitionPolicy::LayerNormOnly:
        if (p.group == "layer_norm") return true;
        return cfg_.embed_ln && cfg_.embed_ln_in_theta1 && p.group == "embed_layer_norm";
    }
    return false;
  }

  // disjoint, exhaustive split of the defender parameters
  std::pair<std::vector<Parameter<T>*>, std::vector<Parameter<T>*>> partition() {
    std::vector<Parameter<T>*> theta1, theta2;
    for (auto* p : params_) (in_theta1(*p) ? theta1 : theta2).push_back(p);
    return {std::move(theta1), std::move(theta2)};
  }

  void apply_partition() {
    for (auto* p : params_) p->set_trainable(in_theta1(*p));
  }

 private:
  DefenderConfig cfg_;
  nn::PatchEmbedding<T> embed_;
  std::unique_ptr<Processor<T>> proc_;
  nn::PixelShuffleDecoder<T> dec_;
  std::vector<Parameter<T>*> params_;
  bool zero_decoder_input_ = false;
};

template <typename T>
std::unique_ptr<Defender<T>> build_defender(const DefenderConfig& cfg, std::uint64_t seed) {
  return std::make_unique<Defender<T>>(cfg, seed);
}

// Masked-patch reconstruction warm start: mask half of the embedded tokens,
// reconstruct the pixels through the decoder, minimize MSE. Only processor
// weights train; the partition policy is re-applied afterwards.
template <typename T>
void proxy_pretrain(Defender<T>& d, const data::Dataset& corpus, int steps, std::uint64_t seed,
                    double lr = 1e-3, std::vector<double>* loss_trace = nullptr) {
  if (corpus.C != d.config().in_c || corpus.H != d.config().in_h || corpus.W != d.config().in_w)
    throw std::invalid_argument("proxy_pretrain: corpus geometry mismatch");
  std::vector<Parameter<T>*> proc_params;
  for (auto* p : d.params())
    if (p->group != "embed" && p->group != "embed_layer_norm") proc_params.push_back(p);
  for (auto* p : proc_params) p->set_trainable(true);
  victim::Adam<T> opt(proc_params, lr);
  Rng rng = Rng::from(seed, "proxy-pretrain");
  const int t = d.tokens(), dim = d.config().dim;
  for (int step = 0; step < steps; ++step) {
    const std::size_t pick = rng.below(corpus.size());
    std::vector<T> px(corpus.pixels());
    const float* src = corpus.image(pick);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<T>(src[i]);
    auto x = Tensor<T>::leaf({corpus.C, corpus.H, corpus.W}, std::move(px), false);

    // mask 50% of token rows
    auto keep = rng.permutation(std::size_t(t));
    std::vector<T> mask(std::size_t(t) * dim, T(0));
    for (int i = 0; i < t / 2; ++i)
      std::fill_n(mask.begin() + keep[i] * dim, dim, T(1));
    auto mask_t = Tensor<T>::leaf({t, dim}, std::move(mask), false);

    opt.zero_grad();
    // the defend() path with the mask inserted after the embedding
    auto tok = ad::mul(d.embed_forward(x), mask_t);
    auto rec = d.decode_forward(d.process_forward(tok));
    auto loss = ad::mse(rec, x);
    if (loss_trace) loss_trace->push_back(double(loss.item()));
    ad::backward(loss);
    opt.step();
  }
  d.apply_partition();
}

// evaluation adapter
template <typename T>
class DefenderDefense final : public PixelDefense {
 public:
  explicit DefenderDefense(const Defender<T>* d) : d_(d) {}
  std::vector<float> apply(const float* x, int, int, int, std::size_t) const override {
    return d_->defend_pixels(x);
  }

 private:
  const Defender<T>* d_;
};

template <typename T>
std::map<std::string, std::string> defender_config_map(const DefenderConfig& c) {
  return {{"in_c", std::to_string(c.in_c)},       {"in_h", std::to_string(c.in_h)},
          {"in_w", std::to_string(c.in_w)},       {"patch", std::to_string(c.patch)},
          {"dim", std::to_string(c.dim)},         {"layers", std::to_string(c.layers)},
          {"heads", std::to_string(c.heads)},     {"causal", c.causal ? "1" : "0"},
          {"pre_norm", c.pre_norm ? "1" : "0"},   {"processor", to_string(c.processor)},
          {"hidden", std::to_string(c.hidden)},   {"policy", to_string(c.policy)},
          {"embed_ln", c.embed_ln ? "1" : "0"},
          {"embed_ln_in_theta1", c.embed_ln_in_theta1 ? "1" : "0"},
          {"with_residual", c.with_residual ? "1" : "0"},
          {"init", c.init.descriptor()}};
}

template <typename T>
void save_defender(const std::string& path, const Defender<T>& d) {
  io::CheckpointHeader h;
  h.kind = "defender";
  h.config = defender_config_map<T>(d.config());
  save_checkpoint(path, h, io::entries_from_params(d.params()));
}

template <typename T>
std::unique_ptr<Defender<T>> load_defender(const std::string& path) {
  auto [h, entries] = io::load_checkpoint(path);
  if (h.kind != "defender") throw std::runtime_error("not a defender checkpoint: " + path);
  const auto geti = [&](const char* k) { return std::stoi(h.config.at(k)); };
  DefenderConfig cfg;
  cfg.in_c = geti("in_c");
  cfg.in_h = geti("in_h");
  cfg.in_w = geti("in_w");
  cfg.patch = geti("patch");
  cfg.dim = geti("dim");
  cfg.layers = geti("layers");
  cfg.heads = geti("heads");
  cfg.causal = geti("causal") != 0;
  cfg.pre_norm = geti("pre_norm") != 0;
  cfg.processor = processor_kind_from(h.config.at("processor"));
  cfg.hidden = geti("hidden");
  cfg.policy = partition_policy_from(h.config.at("policy"));
  cfg.embed_ln = geti("embed_ln") != 0;
  cfg.embed_ln_in_theta1 = geti("embed_ln_in_theta1") != 0;
  cfg.with_residual = geti("with_residual") != 0;
  cfg.init.kind = InitStrategy::Kind::Checkpoint;
  cfg.init.path = path;
  auto d = std::make_unique<Defender<T>>(cfg, 0);
  io::load_params(entries, d->params());
  d->apply_partition();
  return d;
}

} // namespace plugdef::defender
