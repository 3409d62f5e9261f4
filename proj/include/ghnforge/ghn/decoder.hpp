#pragma once

#include "ghnforge/ghn/encoder.hpp"
#include "ghnforge/target_net/param_set.hpp"

namespace ghnforge {

// ---- materialization rule ----
//
// The decoded tensor T has shape (To, Ti, Th, Tw). A target slot maps each of
// its elements to exactly one element of T:
//   4-D (o,i,h,w): channel dims tile-then-truncate (index mod To / mod Ti),
//                  spatial dims take the centered window starting at
//                  (Th - h) / 2 (integer division).
//   2-D (o,i):     as 4-D with h = w = 1 (spatial center).
//   1-D (o,):      column i = 0, spatial center, channel rule on o.
// Rank 3 or spatial extents beyond (Th, Tw) are UnsupportedShape.

inline bool materialize_supported(const Shape& src, const Shape& target) {
  size_t r = target.size();
  if (r != 1 && r != 2 && r != 4) return false;
  if (r == 4 && (target[2] > src[2] || target[3] > src[3])) return false;
  return true;
}

// Linear index into T (row-major over src shape) for every element of the
// target shape, in the target's row-major order.
std::vector<int64_t> materialize_indices(const Shape& src, const Shape& target);

// Value-level materialization from a decoded tensor.
template <class S>
Tensor<S> materialize_value(const Tensor<S>& t4, const Shape& target, bool plus_one = false) {
  auto idx = materialize_indices(t4.shape, target);
  Tensor<S> out(target);
  for (size_t i = 0; i < idx.size(); ++i)
    out[static_cast<int64_t>(i)] = t4[idx[i]] + (plus_one ? S(1) : S(0));
  return out;
}

// Tape op: element gather from a decoded-tensor node (the slices remain
// connected, so gradients flow to exactly the used elements of T).
template <class S>
TapeId<S> materialize(Tape<S>& t, TapeId<S> t4, const Shape& target, bool plus_one = false) {
  auto idx = materialize_indices(t.val(t4).shape, target);
  Tensor<S> out(target);
  const auto& src = t.val(t4);
  for (size_t i = 0; i < idx.size(); ++i)
    out[static_cast<int64_t>(i)] = src[idx[i]] + (plus_one ? S(1) : S(0));
  bool ng = t.needs_grad(t4);
  TapeId<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, t4, idx = std::move(idx)](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto& gs = tp.grad(t4);
      for (size_t i = 0; i < idx.size(); ++i) gs[idx[i]] += g[static_cast<int64_t>(i)];
    });
  }
  return id;
}

// Fused decoder head + materialization. Row p of the hidden activations A
// [P x hid] drives one node; only the rows of w2 that the target shape maps
// to are evaluated, which is algebraically identical to decoding the full
// tensor and slicing it. w2 is [out_rows x hid], b2 [out_rows].
template <class S>
TapeId<S> decode_rows(Tape<S>& t, TapeId<S> a, int64_t p_row, TapeId<S> w2, TapeId<S> b2,
                      std::vector<int64_t> indices, bool plus_one, Shape out_shape) {
  const auto& va = t.val(a);
  const auto& vw = t.val(w2);
  const auto& vb = t.val(b2);
  int64_t hid = va.shape[1];
  Tensor<S> out(std::move(out_shape));
  const S* arow = va.ptr() + p_row * hid;
  for (size_t i = 0; i < indices.size(); ++i) {
    int64_t r = indices[i];
    const S* wrow = vw.ptr() + r * hid;
    S acc = vb[r];
    for (int64_t j = 0; j < hid; ++j) acc += wrow[j] * arow[j];
    out[static_cast<int64_t>(i)] = acc + (plus_one ? S(1) : S(0));
  }
  bool ng = t.needs_grad(a) || t.needs_grad(w2) || t.needs_grad(b2);
  TapeId<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, a, p_row, w2, b2, hid, indices = std::move(indices)](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      const auto& va2 = tp.val(a);
      const auto& vw2 = tp.val(w2);
      const S* arow = va2.ptr() + p_row * hid;
      bool need_a = tp.needs_grad(a);
      bool need_w = tp.needs_grad(w2);
      bool need_b = tp.needs_grad(b2);
      S* garow = need_a ? tp.grad(a).ptr() + p_row * hid : nullptr;
      S* gw = need_w ? tp.grad(w2).ptr() : nullptr;
      S* gb = need_b ? tp.grad(b2).ptr() : nullptr;
      for (size_t i = 0; i < indices.size(); ++i) {
        int64_t r = indices[i];
        S gv = g[static_cast<int64_t>(i)];
        if (gv == S(0)) continue;
        if (need_b) gb[r] += gv;
        const S* wrow = vw2.ptr() + r * hid;
        if (need_w) {
          S* gwrow = gw + r * hid;
          for (int64_t j = 0; j < hid; ++j) gwrow[j] += gv * arow[j];
        }
        if (need_a)
          for (int64_t j = 0; j < hid; ++j) garow[j] += gv * wrow[j];
      }
    });
  }
  return id;
}

// Predicted parameters for one architecture: tape ids per parametric node
// plus per-slot provenance (slots the decoder cannot materialize fall back to
// fan-in random init and join the tape as constants).
template <class S>
struct PredictedParams {
  std::map<int, TapeId<S>> slots;
  std::map<int, ParamSource> source;
};

template <class S>
PredictedParams<S> predict_params(Tape<S>& t, const ArchGraph& g, const GraphFeatures& feat,
                                  GhnModel<S>& model, uint64_t fallback_seed = 0) {
  const GhnConfig& cfg = model.cfg;
  TapeId<S> h = encoder_forward(t, g, feat, model);

  std::vector<int> parametric;
  for (const auto& nd : g.nodes)
    if (nd.shape) parametric.push_back(nd.id);

  PredictedParams<S> out;
  if (parametric.empty()) return out;

  std::vector<int64_t> rows(parametric.begin(), parametric.end());
  TapeId<S> sel = ops::gather_rows(t, h, rows);
  TapeId<S> acts = ops::relu(
      t, ops::linear(t, sel, t.param(model.at("decoder.w1")), t.param(model.at("decoder.b1"))));
  TapeId<S> w2 = t.param(model.at("decoder.w2"));
  TapeId<S> b2 = t.param(model.at("decoder.b2"));

  const Shape src{cfg.decoder_channels(), cfg.decoder_channels(), cfg.decoder_spatial,
                  cfg.decoder_spatial};
  for (size_t p = 0; p < parametric.size(); ++p) {
    int id = parametric[p];
    const ArchNode& nd = g.nodes[static_cast<size_t>(id)];
    const Shape& target = *nd.shape;
    if (!materialize_supported(src, target)) {
      // standard init for layers outside the decoder's reach
      Rng rng(derive_seed(fallback_seed, {0xfa11, static_cast<uint64_t>(id)}));
      out.slots[id] =
          t.constant(random_init_slot<S>(target, nd.attrs.bn_role, nd.op, rng));
      out.source[id] = ParamSource::kRandomInit;
      continue;
    }
    bool plus_one = nd.op == OpKind::kBatchNorm && nd.attrs.bn_role == BnRole::kScale;
    out.slots[id] = decode_rows(t, acts, static_cast<int64_t>(p), w2, b2,
                                materialize_indices(src, target), plus_one, target);
    out.source[id] = ParamSource::kPredicted;
  }
  return out;
}

// Extracts concrete tensors from a prediction.
template <class S>
ParamSet<S> to_param_set(const Tape<S>& t, const PredictedParams<S>& pp) {
  ParamSet<S> out;
  for (const auto& [id, tid] : pp.slots) out.tensors[id] = t.val(tid);
  out.source = pp.source;
  return out;
}

// Full decoded tensor for one feature row: identity materialization over the
// decoder's own output shape. Exercised directly by tests; predict_params
// evaluates only the rows targets need.
template <class S>
TapeId<S> decode_node_full(Tape<S>& t, TapeId<S> a, int64_t p_row, TapeId<S> w2, TapeId<S> b2,
                           const GhnConfig& cfg) {
  Shape src{cfg.decoder_channels(), cfg.decoder_channels(), cfg.decoder_spatial,
            cfg.decoder_spatial};
  std::vector<int64_t> idx(static_cast<size_t>(shape_numel(src)));
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
  return decode_rows(t, a, p_row, w2, b2, std::move(idx), false, src);
}

}  // namespace ghnforge
