#include "plugdef/attack.hpp"

#include <cmath>

#include "plugdef/serialize.hpp"

namespace plugdef::attack {

namespace {
constexpr std::uint32_t kCorpusMagic = 0x31434150u; // "PAC1"
}

std::string AttackConfig::label() const {
  std::string v = variant == Variant::Fgsm ? "fgsm" : (variant == Variant::Pgd ? "pgd" : "apgd");
  return v + (norm == Norm::Linf ? "-linf" : "-l2");
}

double distortion_of(Norm norm, const float* a, const float* b, std::size_t n) {
  if (norm == Norm::Linf) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
  }
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

void save_corpus(const std::string& path, const AdvCorpus& corpus) {
  std::string buf;
  io::put_u32(buf, kCorpusMagic);
  io::put_u32(buf, 1);
  io::put_u32(buf, static_cast<std::uint32_t>(corpus.cfg.norm));
  io::put_u32(buf, static_cast<std::uint32_t>(corpus.cfg.variant));
  io::put_u32(buf, corpus.cfg.random_start ? 1 : 0);
  io::put_f64(buf, corpus.cfg.epsilon);
  io::put_f64(buf, corpus.cfg.resolved_step_size());
  io::put_u32(buf, static_cast<std::uint32_t>(corpus.cfg.steps));
  io::put_u64(buf, corpus.cfg.seed);
  io::put_u64(buf, corpus.victim_checksum);
  io::put_u32(buf, static_cast<std::uint32_t>(corpus.C));
  io::put_u32(buf, static_cast<std::uint32_t>(corpus.H));
  io::put_u32(buf, static_cast<std::uint32_t>(corpus.W));
  io::put_u64(buf, corpus.items.size());
  const std::size_t npx = std::size_t(corpus.C) * corpus.H * corpus.W;
  for (const auto& ex : corpus.items) {
    if (ex.pixels.size() != npx) throw std::runtime_error("save_corpus: pixel size mismatch");
    io::put_u64(buf, ex.origin);
    io::put_u32(buf, static_cast<std::uint32_t>(ex.true_label));
    io::put_u32(buf, static_cast<std::uint32_t>(ex.victim_pred));
    io::put_f64(buf, ex.distortion);
    io::put_u32(buf, (ex.zero_grad ? 1u : 0u) | (ex.attack_failed ? 2u : 0u));
    for (float v : ex.pixels) io::put_f32(buf, v);
  }
  io::write_file(path, buf);
}

AdvCorpus load_corpus(const std::string& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  if (r.u32() != kCorpusMagic) throw std::runtime_error("corpus: bad magic in " + path);
  if (r.u32() != 1) throw std::runtime_error("corpus: unsupported version");
  AdvCorpus c;
  c.cfg.norm = static_cast<Norm>(r.u32());
  c.cfg.variant = static_cast<Variant>(r.u32());
  c.cfg.random_start = r.u32() != 0;
  c.cfg.epsilon = r.f64();
  c.cfg.step_size = r.f64();
  c.cfg.steps = static_cast<int>(r.u32());
  c.cfg.seed = r.u64();
  c.victim_checksum = r.u64();
  c.C = static_cast<int>(r.u32());
  c.H = static_cast<int>(r.u32());
  c.W = static_cast<int>(r.u32());
  const std::uint64_t count = r.u64();
  const std::size_t npx = std::size_t(c.C) * c.H * c.W;
  c.items.resize(count);
  for (auto& ex : c.items) {
    ex.origin = r.u64();
    ex.true_label = static_cast<int>(r.u32());
    ex.victim_pred = static_cast<int>(r.u32());
    ex.distortion = r.f64();
    const auto flags = r.u32();
    ex.zero_grad = (flags & 1u) != 0;
    ex.attack_failed = (flags & 2u) != 0;
    ex.pixels.resize(npx);
    r.raw(ex.pixels.data(), npx * sizeof(float));
  }
  return c;
}

} // namespace plugdef::attack
