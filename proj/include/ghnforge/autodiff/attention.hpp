#pragma once

#include "ghnforge/autodiff/ops.hpp"

namespace ghnforge {
namespace ops {

// Multi-head self-attention over node features H [V x d] with an optional
// additive per-head logit bias given as a [V*V x k] matrix (row i*V+j holds
// the bias vector for the ordered pair (i, j)). Logits are scaled by
// 1/sqrt(d/k) per head. Projections carry biases. One fused node keeps the
// tape small; the backward recomputes nothing, softmax rows are cached.
template <class S>
Id<S> multihead_attention(Tape<S>& t, Id<S> h, Id<S> wq, Id<S> bq, Id<S> wk, Id<S> bk, Id<S> wv,
                          Id<S> bv, Id<S> wo, Id<S> bo, int64_t heads,
                          Id<S> bias = Tape<S>::kNone, Tensor<S>* probs_out = nullptr) {
  Id<S> q = linear(t, h, wq, bq);
  Id<S> k = linear(t, h, wk, bk);
  Id<S> v = linear(t, h, wv, bv);

  const auto& vq = t.val(q);
  int64_t V = vq.shape[0], d = vq.shape[1];
  if (d % heads != 0) throw ShapeMismatch("attention: d must divide heads");
  int64_t dh = d / heads;
  S scale = S(1) / std::sqrt(static_cast<S>(dh));

  if (bias != Tape<S>::kNone) {
    const auto& vb = t.val(bias);
    if (vb.shape[0] != V * V || vb.shape[1] != heads)
      throw ShapeMismatch("attention: bias must be [V*V x heads]");
  }

  // probs[hd] is the V x V softmax matrix of head hd.
  Tensor<S> probs(Shape{heads, V, V});
  Tensor<S> ctx(Shape{V, d});  // concatenated head outputs
  {
    const auto& vk = t.val(k);
    const auto& vv = t.val(v);
    const Tensor<S>* vb = bias != Tape<S>::kNone ? &t.val(bias) : nullptr;
    for (int64_t hd = 0; hd < heads; ++hd) {
      for (int64_t i = 0; i < V; ++i) {
        S* prow = probs.ptr() + (hd * V + i) * V;
        for (int64_t j = 0; j < V; ++j) {
          S dot = 0;
          const S* qi = vq.ptr() + i * d + hd * dh;
          const S* kj = vk.ptr() + j * d + hd * dh;
          for (int64_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
          S logit = dot * scale;
          if (vb) logit += vb->at(i * V + j, hd);
          prow[j] = logit;
        }
        // softmax row
        S mx = prow[0];
        for (int64_t j = 1; j < V; ++j) mx = std::max(mx, prow[j]);
        S sum = 0;
        for (int64_t j = 0; j < V; ++j) {
          prow[j] = std::exp(prow[j] - mx);
          sum += prow[j];
        }
        for (int64_t j = 0; j < V; ++j) prow[j] /= sum;
        // context row for this head
        S* crow = ctx.ptr() + i * d + hd * dh;
        for (int64_t c = 0; c < dh; ++c) crow[c] = 0;
        for (int64_t j = 0; j < V; ++j) {
          const S* vj = vv.ptr() + j * d + hd * dh;
          S p = prow[j];
          for (int64_t c = 0; c < dh; ++c) crow[c] += p * vj[c];
        }
      }
    }
  }

  if (probs_out) *probs_out = probs;

  bool ng = t.needs_grad(q) || t.needs_grad(k) || t.needs_grad(v) ||
            (bias != Tape<S>::kNone && t.needs_grad(bias));
  Id<S> ctx_id = t.add_node(std::move(ctx), ng, nullptr);
  if (ng) {
    auto back = [ctx_id, q, k, v, bias, heads, V, d, dh, scale,
                 probs = std::move(probs)](Tape<S>& tp) {
      const auto& g = tp.grad(ctx_id);
      const auto& vq2 = tp.val(q);
      const auto& vk2 = tp.val(k);
      const auto& vv2 = tp.val(v);
      auto& gq = tp.grad(q);
      auto& gk = tp.grad(k);
      auto& gv = tp.grad(v);
      Tensor<S>* gb = nullptr;
      if (bias != Tape<S>::kNone && tp.needs_grad(bias)) gb = &tp.grad(bias);
      std::vector<S> dp(static_cast<size_t>(V));
      for (int64_t hd = 0; hd < heads; ++hd) {
        for (int64_t i = 0; i < V; ++i) {
          const S* prow = probs.ptr() + (hd * V + i) * V;
          const S* grow = g.ptr() + i * d + hd * dh;
          // dP = dCtx . V^T ; dV += P^T dCtx
          S dotsum = 0;
          for (int64_t j = 0; j < V; ++j) {
            const S* vj = vv2.ptr() + j * d + hd * dh;
            S acc = 0;
            for (int64_t c = 0; c < dh; ++c) acc += grow[c] * vj[c];
            dp[static_cast<size_t>(j)] = acc;
            dotsum += acc * prow[j];
            S* gvj = gv.ptr() + j * d + hd * dh;
            S p = prow[j];
            for (int64_t c = 0; c < dh; ++c) gvj[c] += p * grow[c];
          }
          // softmax backward -> dLogits, then into q, k, bias
          const S* qi = vq2.ptr() + i * d + hd * dh;
          S* gqi = gq.ptr() + i * d + hd * dh;
          for (int64_t j = 0; j < V; ++j) {
            S dl = prow[j] * (dp[static_cast<size_t>(j)] - dotsum);
            if (gb) gb->at(i * V + j, hd) += dl;
            const S* kj = vk2.ptr() + j * d + hd * dh;
            S* gkj = gk.ptr() + j * d + hd * dh;
            S dls = dl * scale;
            for (int64_t c = 0; c < dh; ++c) {
              gqi[c] += dls * kj[c];
              gkj[c] += dls * qi[c];
            }
          }
        }
      }
    };
    t.set_back(ctx_id, std::move(back));
  }
  return linear(t, ctx_id, wo, bo);
}

}  // namespace ops
}  // namespace ghnforge
