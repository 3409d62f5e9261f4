#pragma once

#include "ghnforge/archgraph/features.hpp"
#include "ghnforge/autodiff/attention.hpp"
#include "ghnforge/autodiff/conv_ops.hpp"
#include "ghnforge/ghn/model.hpp"

namespace ghnforge {

template <class S>
using TapeId = typename Tape<S>::Id;

// Initial node features: op embedding plus the enabled structural terms
// (in/out-degree centrality, input distance). Disabled terms contribute
// nothing. Degree indices clip to the last bucket.
template <class S>
TapeId<S> embed_nodes(Tape<S>& t, const ArchGraph& g, const GraphFeatures& feat,
                      GhnModel<S>& model) {
  const GhnConfig& cfg = model.cfg;
  const int n = g.node_count();
  std::vector<int64_t> op_idx(static_cast<size_t>(n));
  for (const auto& nd : g.nodes) op_idx[static_cast<size_t>(nd.id)] = static_cast<int64_t>(nd.op);
  TapeId<S> h = ops::gather_rows(t, t.param(model.at("embed.op")), op_idx);

  auto clip = [&](int v) { return static_cast<int64_t>(std::min(v, cfg.max_degree)); };
  if (cfg.use_centrality) {
    std::vector<int64_t> in_idx(static_cast<size_t>(n)), out_idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      in_idx[static_cast<size_t>(i)] = clip(feat.in_degree[static_cast<size_t>(i)]);
      out_idx[static_cast<size_t>(i)] = clip(feat.out_degree[static_cast<size_t>(i)]);
    }
    h = ops::add(t, h, ops::gather_rows(t, t.param(model.at("embed.in_deg")), in_idx));
    h = ops::add(t, h, ops::gather_rows(t, t.param(model.at("embed.out_deg")), out_idx));
  }
  if (cfg.use_input_dist) {
    std::vector<int64_t> di(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      di[static_cast<size_t>(i)] = static_cast<int64_t>(feat.input_dist[static_cast<size_t>(i)]);
    h = ops::add(t, h, ops::gather_rows(t, t.param(model.at("embed.input_dist")), di));
  }
  return h;
}

// Per-head attention bias for all ordered node pairs, returned as a
// [V*V x heads] matrix (row i*V+j = pair (i,j)), or kNone for mode kNone.
//   kGhn3:      phi([e_fw(spd_fw[i][j]), e_bw(spd_bw[i][j])])
//   kGraphormer e_fw(spd_fw[i][j])
template <class S>
TapeId<S> attention_bias(Tape<S>& t, const GraphFeatures& feat, GhnModel<S>& model,
                         EdgeBiasMode mode, const std::string& prefix = "edge") {
  if (mode == EdgeBiasMode::kNone) return Tape<S>::kNone;
  const int n = feat.n;
  std::vector<int64_t> fw_idx(static_cast<size_t>(n) * n), bw_idx(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      fw_idx[static_cast<size_t>(i) * n + j] = feat.fw(i, j);
      bw_idx[static_cast<size_t>(i) * n + j] = feat.bw(i, j);
    }
  TapeId<S> efw = ops::gather_rows(t, t.param(model.at(prefix + ".fw")), fw_idx);
  if (mode == EdgeBiasMode::kGraphormer) return efw;
  TapeId<S> ebw = ops::gather_rows(t, t.param(model.at(prefix + ".bw")), bw_idx);
  TapeId<S> cat = ops::concat_channels(t, std::vector<TapeId<S>>{efw, ebw});
  TapeId<S> hid = ops::relu(
      t, ops::linear(t, cat, t.param(model.at(prefix + ".phi.w1")), t.param(model.at(prefix + ".phi.b1"))));
  return ops::linear(t, hid, t.param(model.at(prefix + ".phi.w2")),
                     t.param(model.at(prefix + ".phi.b2")));
}

// Pre-norm transformer stack: x += MSA(LN(x)); x += MLP(LN(x)). With use_sa
// off the attention sublayer is dropped entirely and information cannot move
// between nodes. The edge bias is shared across layers unless the config
// asks for per-layer tables.
template <class S>
TapeId<S> encoder_forward(Tape<S>& t, const ArchGraph& g, const GraphFeatures& feat,
                          GhnModel<S>& model, std::vector<Tensor<S>>* attn_probs_out = nullptr) {
  const GhnConfig& cfg = model.cfg;
  TapeId<S> h = embed_nodes(t, g, feat, model);
  TapeId<S> shared_bias = Tape<S>::kNone;
  if (cfg.use_sa && !cfg.per_layer_edge_bias)
    shared_bias = attention_bias(t, feat, model, cfg.edge_mode());

  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    if (cfg.use_sa) {
      TapeId<S> bias = shared_bias;
      if (cfg.per_layer_edge_bias)
        bias = attention_bias(t, feat, model, cfg.edge_mode(), "edge.l" + std::to_string(l));
      TapeId<S> a = ops::layernorm(t, h, t.param(model.at(p + "norm1.g")),
                                   t.param(model.at(p + "norm1.b")));
      Tensor<S> probs;
      TapeId<S> s = ops::multihead_attention(
          t, a, t.param(model.at(p + "attn.wq")), t.param(model.at(p + "attn.bq")),
          t.param(model.at(p + "attn.wk")), t.param(model.at(p + "attn.bk")),
          t.param(model.at(p + "attn.wv")), t.param(model.at(p + "attn.bv")),
          t.param(model.at(p + "attn.wo")), t.param(model.at(p + "attn.bo")),
          cfg.heads, bias, attn_probs_out ? &probs : nullptr);
      if (attn_probs_out) attn_probs_out->push_back(std::move(probs));
      h = ops::add(t, h, s);
    }
    TapeId<S> a2 = ops::layernorm(t, h, t.param(model.at(p + "norm2.g")),
                                  t.param(model.at(p + "norm2.b")));
    TapeId<S> m = ops::linear(t, a2, t.param(model.at(p + "mlp.w1")),
                              t.param(model.at(p + "mlp.b1")));
    m = ops::relu(t, m);
    m = ops::linear(t, m, t.param(model.at(p + "mlp.w2")), t.param(model.at(p + "mlp.b2")));
    h = ops::add(t, h, m);
  }
  if (!t.val(h).all_finite())
    throw NonFiniteActivation(-1, "non-finite encoder output for " + g.name);
  return h;
}

}  // namespace ghnforge
