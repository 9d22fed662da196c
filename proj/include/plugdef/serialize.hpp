#pragma once
// Flat binary checkpoint format, all fields little-endian:
//   magic   u32 "PDB1"
//   version u32 = 1
//   kind    string        (u32 length + bytes)
//   config  u32 count, then count * (string key, string value)
//   params  u32 count, then count * (string name, u32 ndim, u32 dims[],
//                                    f32 data[prod(dims)])
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plugdef/rng.hpp"
#include "plugdef/tensor.hpp"

namespace plugdef::io {

constexpr std::uint32_t kCheckpointMagic = 0x31424450u; // "PDB1"

struct CheckpointHeader {
  std::string kind;
  std::map<std::string, std::string> config; // ordered -> deterministic bytes
};

struct TensorEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<TensorEntry>& entries);
std::pair<CheckpointHeader, std::vector<TensorEntry>> load_checkpoint(const std::string& path);
CheckpointHeader peek_checkpoint_header(const std::string& path);

// Low-level little-endian writers shared with the corpus format.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);
void put_f64(std::string& out, double v);
void put_str(std::string& out, const std::string& s);

struct ByteReader {
  const unsigned char* p;
  std::size_t n;
  std::size_t off = 0;
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();
  void raw(void* dst, std::size_t count);
  void need(std::size_t count) const;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

template <typename T>
std::vector<TensorEntry> entries_from_params(const std::vector<ad::Parameter<T>*>& params) {
  std::vector<TensorEntry> out;
  out.reserve(params.size());
  for (const auto* p : params) {
    TensorEntry e;
    e.name = p->name;
    e.shape = p->tensor.shape();
    e.data.reserve(p->tensor.data().size());
    for (const T v : p->tensor.data()) e.data.push_back(static_cast<float>(v));
    out.push_back(std::move(e));
  }
  return out;
}

// Strict by-name restore: every parameter must be present with its shape.
template <typename T>
void load_params(const std::vector<TensorEntry>& entries, const std::vector<ad::Parameter<T>*>& params) {
  std::map<std::string, const TensorEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: missing parameter " + p->name);
    const TensorEntry& e = *it->second;
    if (e.shape != p->tensor.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
    auto& dst = p->tensor.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.data[i]);
  }
}

// FNV-1a over names and the raw in-memory bytes; bit-exact identity probe.
template <typename T>
std::uint64_t params_checksum(const std::vector<ad::Parameter<T>*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* p : params) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->tensor.data().data(), p->tensor.data().size() * sizeof(T), h);
  }
  return h;
}

} // namespace plugdef::io
