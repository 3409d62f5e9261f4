#pragma once

#include <map>
#include <string>

#include "ghnforge/archgraph/graph.hpp"
#include "ghnforge/core/binio.hpp"
#include "ghnforge/core/errors.hpp"
#include "ghnforge/core/hash.hpp"
#include "ghnforge/core/rng.hpp"
#include "ghnforge/core/tensor.hpp"

namespace ghnforge {

enum class ParamSource : uint8_t { kRandomInit = 0, kPredicted = 1, kLoaded = 2 };

inline const char* param_source_name(ParamSource s) {
  switch (s) {
    case ParamSource::kRandomInit: return "random_init";
    case ParamSource::kPredicted: return "predicted";
    default: return "loaded";
  }
}

// One tensor per parametric node of a graph.
template <class S>
struct ParamSet {
  std::map<int, Tensor<S>> tensors;
  std::map<int, ParamSource> source;

  bool all_finite() const {
    for (const auto& [id, t] : tensors)
      if (!t.all_finite()) return false;
    return true;
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [id, t] : tensors) out.tensors[id] = t.template cast<U>();
    out.source = source;
    return out;
  }
};

// He-style init for one slot shape: fan-in-scaled normal for conv/linear and
// the classifier head, scale = 1 / shift = 0 for the BN vector slots.
template <class S>
Tensor<S> random_init_slot(const ParamShape& shape, BnRole bn_role, OpKind op, Rng& rng) {
  Tensor<S> t(shape);
  if (op == OpKind::kBatchNorm) {
    t.fill(bn_role == BnRole::kScale ? S(1) : S(0));
    return t;
  }
  int64_t fan_in = 1;
  for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<S>(rng.normal(0.0, std));
  return t;
}

template <class S>
ParamSet<S> random_init(const ArchGraph& g, Rng& rng) {
  ParamSet<S> p;
  for (const auto& n : g.nodes) {
    if (!n.shape) continue;
    p.tensors[n.id] = random_init_slot<S>(*n.shape, n.attrs.bn_role, n.op, rng);
    p.source[n.id] = ParamSource::kRandomInit;
  }
  return p;
}

// Replaces only the classifier-head slot with a fresh random tensor of shape
// (new_num_classes, feat_dim); every other tensor is left bit-identical.
template <class S>
ParamSet<S> reinit_head(const ArchGraph& g, const ParamSet<S>& p, int new_num_classes, Rng& rng) {
  ParamSet<S> out = p;
  int head = g.sink_index();
  auto it = p.tensors.find(head);
  if (it == p.tensors.end()) throw ShapeMismatch("reinit_head: head slot missing");
  int64_t feat = it->second.shape[1];
  ParamShape shape{new_num_classes, feat};
  out.tensors[head] =
      random_init_slot<S>(shape, BnRole::kScale, OpKind::kClassifierHead, rng);
  out.source[head] = ParamSource::kRandomInit;
  return out;
}

// Checkpoint format: magic, version, then ordered (node_id, shape, float32
// payload) records. Per-slot provenance travels in the JSON sidecar written
// by the predict command, not here.
inline constexpr uint32_t kParamSetMagic = 0x53504647;  // "GFPS"
inline constexpr uint32_t kParamSetVersion = 1;

template <class S>
void save_param_set(const ParamSet<S>& p, const std::string& path) {
  BinWriter w(path);
  w.u32(kParamSetMagic);
  w.u32(kParamSetVersion);
  w.u32(static_cast<uint32_t>(p.tensors.size()));
  for (const auto& [id, t] : p.tensors) {
    w.u32(static_cast<uint32_t>(id));
    write_tensor_f32(w, t);
  }
}

template <class S>
ParamSet<S> load_param_set(const std::string& path) {
  BinReader r(path);
  if (r.u32() != kParamSetMagic) throw IoError("not a param-set checkpoint: " + path);
  if (r.u32() != kParamSetVersion) throw IoError("unsupported param-set version: " + path);
  ParamSet<S> p;
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    int id = static_cast<int>(r.u32());
    p.tensors[id] = read_tensor_f32<S>(r);
    p.source[id] = ParamSource::kLoaded;
  }
  return p;
}

// Order- and content-sensitive digest of all tensors except the head slot;
// used to assert that head reinit leaves the rest untouched.
template <class S>
uint64_t hash_non_head_tensors(const ArchGraph& g, const ParamSet<S>& p) {
  int head = g.sink_index();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [id, t] : p.tensors) {
    if (id == head) continue;
    h = fnv1a64(&id, sizeof(id), h);
    for (S v : t.data) {
      float f = static_cast<float>(v);
      h = fnv1a64(&f, sizeof(f), h);
    }
  }
  return h;
}

}  // namespace ghnforge
