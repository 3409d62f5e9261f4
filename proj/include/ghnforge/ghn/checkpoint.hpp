#pragma once

#include "ghnforge/core/binio.hpp"
#include "ghnforge/ghn/model.hpp"

namespace ghnforge {

// GHN checkpoint: magic, version, embedded config snapshot, then one named
// float32 tensor record per parameter in creation order. Round-trips
// bit-exactly for float models.
inline constexpr uint32_t kGhnCkptMagic = 0x334e4847;  // "GHN3"
inline constexpr uint32_t kGhnCkptVersion = 1;

template <class S>
void save_ghn(const GhnModel<S>& model, const std::string& path) {
  BinWriter w(path);
  w.u32(kGhnCkptMagic);
  w.u32(kGhnCkptVersion);
  w.str(model.cfg.to_json());
  w.u32(static_cast<uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    w.str(p.name);
    write_tensor_f32(w, p.value);
  }
}

template <class S>
GhnModel<S> load_ghn(const std::string& path) {
  BinReader r(path);
  if (r.u32() != kGhnCkptMagic) throw IoError("not a GHN checkpoint: " + path);
  if (r.u32() != kGhnCkptVersion) throw IoError("unsupported GHN checkpoint version: " + path);
  GhnConfig cfg = GhnConfig::from_json(r.str());
  GhnModel<S> model(cfg, 0);
  uint32_t n = r.u32();
  if (n != model.params().size())
    throw IoError("GHN checkpoint parameter count mismatch: " + path);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    Tensor<S> t = read_tensor_f32<S>(r);
    auto& p = model.at(name);
    if (t.shape != p.value.shape)
      throw IoError("GHN checkpoint shape mismatch for " + name + ": " + path);
    p.value = std::move(t);
  }
  return model;
}

}  // namespace ghnforge
