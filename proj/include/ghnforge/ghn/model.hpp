#pragma once

#include <map>
#include <string>
#include <vector>

#include "ghnforge/archgraph/graph.hpp"
#include "ghnforge/autodiff/tape.hpp"
#include "ghnforge/core/rng.hpp"
#include "ghnforge/ghn/config.hpp"

namespace ghnforge {

// All trainable hypernetwork state, in a fixed creation order that defines
// both the checkpoint layout and the optimizer's iteration order. Parameters
// exist for every feature regardless of ablation flags; disabled features
// simply never touch theirs.
template <class S>
class GhnModel {
 public:
  GhnConfig cfg;

  GhnModel() = default;
  explicit GhnModel(GhnConfig c, uint64_t init_seed = 0) : cfg(c) { build(init_seed); }

  std::vector<Parameter<S>>& params() { return params_; }
  const std::vector<Parameter<S>>& params() const { return params_; }

  Parameter<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no such GHN parameter: " + name);
    return params_[it->second];
  }
  const Parameter<S>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no such GHN parameter: " + name);
    return params_[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p.grad.zero();
  }

  double grad_norm() const {
    double ss = 0;
    for (const auto& p : params_)
      for (S v : p.grad.data) ss += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(ss);
  }

  template <class U>
  GhnModel<U> cast() const {
    GhnModel<U> out;
    out.cfg = cfg;
    out.copy_from_named([&](const std::string& name) { return at(name).value.template cast<U>(); },
                        params_);
    return out;
  }

  // internal: rebuild structure then overwrite values by name
  template <class F, class PV>
  void copy_from_named(F&& value_of, const PV& names_src) {
    build(0);
    for (const auto& p : names_src) at(p.name).value = value_of(p.name);
  }

 private:
  std::vector<Parameter<S>> params_;
  std::map<std::string, size_t> index_;

  void add(const std::string& name, Shape shape, double std_dev, Rng& rng, double fill = 0.0) {
    Tensor<S> t(std::move(shape));
    if (std_dev > 0) {
      for (auto& v : t.data) v = static_cast<S>(rng.normal(0.0, std_dev));
    } else if (fill != 0.0) {
      t.fill(static_cast<S>(fill));
    }
    index_[name] = params_.size();
    params_.emplace_back(name, std::move(t));
  }

  void build(uint64_t seed) {
    params_.clear();
    index_.clear();
    const int64_t d = cfg.hidden, k = cfg.heads;
    const int64_t db = cfg.dist_buckets(), gb = cfg.degree_buckets();
    // generous reserve: vector growth must not invalidate Parameter pointers
    // held by tapes, so the vector is only built here and never resized later
    params_.reserve(static_cast<size_t>(16 + 16 * cfg.layers + (cfg.per_layer_edge_bias ? 6 * cfg.layers : 0)));
    Rng rng(derive_seed(seed, {0x6417}));

    const double emb_std = 0.02;
    add("embed.op", {kOpKindCount, d}, emb_std, rng);
    add("embed.in_deg", {gb, d}, emb_std, rng);
    add("embed.out_deg", {gb, d}, emb_std, rng);
    add("embed.input_dist", {db, d}, emb_std, rng);

    auto add_edge_bias = [&](const std::string& prefix) {
      add(prefix + ".fw", {db, k}, emb_std, rng);
      add(prefix + ".bw", {db, k}, emb_std, rng);
      add(prefix + ".phi.w1", {2 * k, 2 * k}, std::sqrt(2.0 / static_cast<double>(2 * k)), rng);
      add(prefix + ".phi.b1", {2 * k}, 0.0, rng);
      add(prefix + ".phi.w2", {k, 2 * k}, std::sqrt(2.0 / static_cast<double>(2 * k)), rng);
      add(prefix + ".phi.b2", {k}, 0.0, rng);
    };
    if (cfg.per_layer_edge_bias) {
      for (int l = 0; l < cfg.layers; ++l) add_edge_bias("edge.l" + std::to_string(l));
    } else {
      add_edge_bias("edge");
    }

    const double proj_std = 0.02;
    for (int l = 0; l < cfg.layers; ++l) {
      std::string p = "layer" + std::to_string(l) + ".";
      add(p + "norm1.g", {d}, 0.0, rng, 1.0);
      add(p + "norm1.b", {d}, 0.0, rng);
      add(p + "attn.wq", {d, d}, proj_std, rng);
      add(p + "attn.bq", {d}, 0.0, rng);
      add(p + "attn.wk", {d, d}, proj_std, rng);
      add(p + "attn.bk", {d}, 0.0, rng);
      add(p + "attn.wv", {d, d}, proj_std, rng);
      add(p + "attn.bv", {d}, 0.0, rng);
      add(p + "attn.wo", {d, d}, proj_std, rng);
      add(p + "attn.bo", {d}, 0.0, rng);
      add(p + "norm2.g", {d}, 0.0, rng, 1.0);
      add(p + "norm2.b", {d}, 0.0, rng);
      add(p + "mlp.w1", {4 * d, d}, std::sqrt(2.0 / static_cast<double>(d)), rng);
      add(p + "mlp.b1", {4 * d}, 0.0, rng);
      add(p + "mlp.w2", {d, 4 * d}, std::sqrt(2.0 / static_cast<double>(4 * d)), rng);
      add(p + "mlp.b2", {d}, 0.0, rng);
    }

    const int64_t dec_hidden = static_cast<int64_t>(cfg.decoder_hidden_mult) * d;
    add("decoder.w1", {dec_hidden, d}, std::sqrt(2.0 / static_cast<double>(d)), rng);
    add("decoder.b1", {dec_hidden}, 0.0, rng);
    add("decoder.w2", {cfg.decoder_out(), dec_hidden}, 0.01, rng);
    add("decoder.b2", {cfg.decoder_out()}, 0.0, rng);
  }

  template <class U>
  friend class GhnModel;
};

}  // namespace ghnforge
