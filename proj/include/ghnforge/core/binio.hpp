#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ghnforge/core/errors.hpp"
#include "ghnforge/core/tensor.hpp"

namespace ghnforge {

// Little-endian binary record IO for checkpoints and datasets. Assumes a
// little-endian host (x86-64 / aarch64).

struct BinWriter {
  std::ofstream out;

  explicit BinWriter(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw IoError("cannot open for write: " + path);
  }

  void bytes(const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed");
  }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void i64(int64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f32_vec(const std::vector<float>& v) {
    u64(v.size());
    bytes(v.data(), v.size() * 4);
  }
  void shape(const Shape& s) {
    u32(static_cast<uint32_t>(s.size()));
    for (int64_t d : s) i64(d);
  }
};

struct BinReader {
  std::ifstream in;
  std::string path;

  explicit BinReader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw IoError("cannot open for read: " + p);
  }

  void bytes(void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) throw IoError("truncated file: " + path);
  }
  uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
  uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
  int64_t i64() { int64_t v; bytes(&v, 8); return v; }
  float f32() { float v; bytes(&v, 4); return v; }
  std::string str() {
    uint32_t n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<float> f32_vec() {
    uint64_t n = u64();
    std::vector<float> v(n);
    bytes(v.data(), n * 4);
    return v;
  }
  Shape shape() {
    uint32_t r = u32();
    Shape s(r);
    for (uint32_t i = 0; i < r; ++i) s[i] = i64();
    return s;
  }
};

// Tensors are stored as float32 regardless of the in-memory scalar type, so
// checkpoints round-trip bit-exactly for float models.
template <class S>
void write_tensor_f32(BinWriter& w, const Tensor<S>& t) {
  w.shape(t.shape);
  w.u64(static_cast<uint64_t>(t.numel()));
  for (S v : t.data) w.f32(static_cast<float>(v));
}

template <class S>
Tensor<S> read_tensor_f32(BinReader& r) {
  Tensor<S> t;
  t.shape = r.shape();
  uint64_t n = r.u64();
  if (static_cast<int64_t>(n) != shape_numel(t.shape)) throw IoError("tensor record numel mismatch: " + r.path);
  t.data.resize(n);
  for (uint64_t i = 0; i < n; ++i) t.data[i] = static_cast<S>(r.f32());
  return t;
}

}  // namespace ghnforge
