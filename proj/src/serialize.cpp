#include "plugdef/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace plugdef::io {

// raw() memcpys f32 blocks straight from the little-endian stream
static_assert(std::endian::native == std::endian::little,
              "checkpoint reader assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

void ByteReader::need(std::size_t count) const {
  if (off + count > n) throw std::runtime_error("checkpoint/corpus: truncated at byte " + std::to_string(off));
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[off + i]) << (8 * i);
  off += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[off + i]) << (8 * i);
  off += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint32_t len = u32();
  need(len);
  std::string s(reinterpret_cast<const char*>(p + off), len);
  off += len;
  return s;
}

void ByteReader::raw(void* dst, std::size_t count) {
  need(count);
  std::memcpy(dst, p + off, count);
  off += count;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

namespace {

void encode_header(std::string& buf, const CheckpointHeader& header) {
  put_u32(buf, kCheckpointMagic);
  put_u32(buf, 1);
  put_str(buf, header.kind);
  put_u32(buf, static_cast<std::uint32_t>(header.config.size()));
  for (const auto& [k, v] : header.config) {
    put_str(buf, k);
    put_str(buf, v);
  }
}

CheckpointHeader decode_header(ByteReader& r) {
  if (r.u32() != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic");
  const auto version = r.u32();
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  CheckpointHeader h;
  h.kind = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto k = r.str();
    h.config[k] = r.str();
  }
  return h;
}

} // namespace

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<TensorEntry>& entries) {
  std::string buf;
  encode_header(buf, header);
  put_u32(buf, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_str(buf, e.name);
    put_u32(buf, static_cast<std::uint32_t>(e.shape.size()));
    std::size_t count = 1;
    for (int d : e.shape) {
      put_u32(buf, static_cast<std::uint32_t>(d));
      count *= static_cast<std::size_t>(d);
    }
    if (count != e.data.size()) throw std::runtime_error("checkpoint: bad entry " + e.name);
    for (float v : e.data) put_f32(buf, v);
  }
  write_file(path, buf);
}

std::pair<CheckpointHeader, std::vector<TensorEntry>> load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  CheckpointHeader h = decode_header(r);
  const auto count = r.u32();
  std::vector<TensorEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorEntry e;
    e.name = r.str();
    const auto ndim = r.u32();
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(static_cast<int>(r.u32()));
      total *= static_cast<std::size_t>(e.shape.back());
    }
    e.data.resize(total);
    r.raw(e.data.data(), total * sizeof(float));
    entries.push_back(std::move(e));
  }
  return {std::move(h), std::move(entries)};
}

CheckpointHeader peek_checkpoint_header(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  return decode_header(r);
}

} // namespace plugdef::io
