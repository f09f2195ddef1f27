#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

// Checkpoint container: a flat, ordered list of named fp64 tensors.
//
//   bytes 0..3   magic "AMRL"
//   byte  4      format version (currently 1)
//   u32          tensor count
//   per tensor:
//     u16        name length, then that many name bytes
//     u8         rank (always 2)
//     u32 x 2    rows, cols
//     u64        payload byte length (8 * rows * cols)
//     f64 x N    row-major values
//
// All integers and doubles are little-endian regardless of host order.

namespace ckpt {

inline constexpr char kMagic[4] = {'A', 'M', 'R', 'L'};
inline constexpr uint8_t kVersion = 1;

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<uint64_t>(d)); }

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  uint8_t u8() { return static_cast<uint8_t>(byte()); }
  uint16_t u16() { return static_cast<uint16_t>(byte()) | static_cast<uint16_t>(byte()) << 8; }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(size_t len) {
    need(len);
    std::string s = buf_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

  void need(size_t n) {
    if (pos_ + n > buf_.size()) throw IoError("checkpoint truncated: " + path_);
  }

 private:
  unsigned char byte() {
    need(1);
    return static_cast<unsigned char>(buf_[pos_++]);
  }
  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace ckpt

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::string out;
  out.append(ckpt::kMagic, 4);
  out.push_back(static_cast<char>(ckpt::kVersion));
  ckpt::put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw ArgumentError("tensor name too long: " + name);
    ckpt::put_u16(out, static_cast<uint16_t>(name.size()));
    out.append(name);
    out.push_back(2);
    ckpt::put_u32(out, static_cast<uint32_t>(t.rows));
    ckpt::put_u32(out, static_cast<uint32_t>(t.cols));
    ckpt::put_u64(out, static_cast<uint64_t>(t.size()) * 8);
    for (double d : t.data) ckpt::put_f64(out, d);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ckpt::Reader r(buf, path);
  r.need(5);
  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), ckpt::kMagic, 4) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  const uint8_t version = r.u8();
  if (version != ckpt::kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  const uint32_t count = r.u32();
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const uint8_t rank = r.u8();
    if (rank != 2) throw IoError("unsupported tensor rank in checkpoint: " + path);
    const uint32_t rows = r.u32();
    const uint32_t cols = r.u32();
    const uint64_t bytes = r.u64();
    if (bytes != static_cast<uint64_t>(rows) * cols * 8)
      throw IoError("inconsistent tensor length for '" + name + "': " + path);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    for (size_t k = 0; k < t.size(); ++k) t.data[k] = r.f64();
    out.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw IoError("trailing bytes after last tensor: " + path);
  return out;
}

}  // namespace amodrl
