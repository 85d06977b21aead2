#include "clenet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "clenet/error.hpp"

namespace clenet {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'E', 'N'};

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > buf.size())
      throw FormatError("checkpoint: truncated payload in " + path);
  }
  uint8_t u8() {
    need(1);
    return uint8_t(buf[pos++]);
  }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(uint8_t(buf[pos])) |
                 uint16_t(uint8_t(buf[pos + 1])) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

int64_t implied_bias_len(const Shape& dims, const std::string& name,
                         const std::string& path) {
  if (dims.size() == 4) return dims[0];
  if (dims.size() == 2) return dims[1];
  throw FormatError("checkpoint: record '" + name + "' in " + path +
                    " has unsupported rank " + std::to_string(dims.size()));
}

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ckpt.version);
  put_u32(out, uint32_t(ckpt.records.size()));
  for (const auto& r : ckpt.records) {
    if (r.name.size() > 0xffff)
      throw ConfigError("checkpoint: record name too long: " + r.name);
    put_u16(out, uint16_t(r.name.size()));
    out += r.name;
    out.push_back(char(r.dims.size()));
    for (int64_t d : r.dims) put_u64(out, uint64_t(d));
    if (int64_t(r.weights.size()) != shape_numel(r.dims))
      throw ConfigError("checkpoint: weight payload size mismatch for '" +
                        r.name + "'");
    if (int64_t(r.bias.size()) != implied_bias_len(r.dims, r.name, path))
      throw ConfigError("checkpoint: bias payload size mismatch for '" +
                        r.name + "'");
    for (float v : r.weights) put_f32(out, v);
    for (float v : r.bias) put_f32(out, v);
  }
  out.push_back(char(ckpt.meta.regime));
  put_u64(out, ckpt.meta.iteration);
  put_u64(out, ckpt.meta.seed);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot write " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};

  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic in " + path);
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != 1)
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(ckpt.version) + " in " + path);
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    const uint16_t name_len = r.u16();
    rec.name = r.bytes(name_len);
    const uint8_t rank = r.u8();
    if (rank == 0 || rank > 8)
      throw FormatError("checkpoint: bad rank in record '" + rec.name +
                        "' in " + path);
    for (uint8_t d = 0; d < rank; ++d) {
      const uint64_t e = r.u64();
      if (e == 0 || e > (1ull << 32))
        throw FormatError("checkpoint: bad extent in record '" + rec.name +
                          "' in " + path);
      rec.dims.push_back(int64_t(e));
    }
    const int64_t wn = shape_numel(rec.dims);
    const int64_t bn = implied_bias_len(rec.dims, rec.name, path);
    rec.weights.resize(size_t(wn));
    for (int64_t w = 0; w < wn; ++w) rec.weights[size_t(w)] = r.f32();
    rec.bias.resize(size_t(bn));
    for (int64_t b = 0; b < bn; ++b) rec.bias[size_t(b)] = r.f32();
    ckpt.records.push_back(std::move(rec));
  }
  ckpt.meta.regime = r.u8();
  ckpt.meta.iteration = r.u64();
  ckpt.meta.seed = r.u64();
  if (r.pos != buf.size())
    throw FormatError("checkpoint: trailing bytes in " + path);
  return ckpt;
}

}  // namespace clenet
