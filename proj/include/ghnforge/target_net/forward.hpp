#pragma once

#include <map>
#include <vector>

#include "ghnforge/archgraph/features.hpp"
#include "ghnforge/autodiff/attention.hpp"
#include "ghnforge/autodiff/conv_ops.hpp"
#include "ghnforge/target_net/param_set.hpp"

namespace ghnforge {

struct Batch {
  Tensor<float> images;     // B x C x H x W
  std::vector<int> labels;  // B, values in [0, num_classes)

  int64_t size() const { return images.shape.empty() ? 0 : images.shape[0]; }
};

// (node_id, population variance of that node's output), recorded after every
// conv/linear node in execution order.
struct ActivationTrace {
  std::vector<std::pair<int, double>> variances;
};

// Batch-norm statistics handling:
//   kBatch         batch stats, stateless (GHN training, no-fine-tune eval)
//   kRunningUpdate batch stats + update running stats (fine-tune steps)
//   kRunningEval   frozen running stats (fine-tune validation)
enum class BnMode { kBatch, kRunningUpdate, kRunningEval };

template <class S>
struct BnRunning {
  // node_id of the bn scale node -> (mean, var)
  std::map<int, std::pair<std::vector<S>, std::vector<S>>> stats;
  double momentum = 0.1;
};

// Executes the graph on a tape. `slots` maps each parametric node to the tape
// id of its tensor (predicted, random or loaded). Returns the logits id.
// Throws ShapeMismatch / NonFiniteActivation.
template <class S>
typename Tape<S>::Id run_graph(Tape<S>& t, const ArchGraph& g,
                               const std::map<int, typename Tape<S>::Id>& slots,
                               typename Tape<S>::Id x_input, BnMode bn_mode,
                               BnRunning<S>* running = nullptr, ActivationTrace* trace = nullptr) {
  using Id = typename Tape<S>::Id;
  const int n = g.node_count();
  auto preds = g.pred_lists();

  // execution order: topological over edges (ids may be arbitrary)
  std::vector<int> indeg(static_cast<size_t>(n), 0);
  for (auto [s, d] : g.edges) {
    (void)s;
    ++indeg[static_cast<size_t>(d)];
  }
  auto succs = g.succ_lists();
  std::vector<int> order;
  {
    std::vector<int> q;
    for (const auto& nd : g.nodes)
      if (indeg[static_cast<size_t>(nd.id)] == 0) q.push_back(nd.id);
    std::sort(q.begin(), q.end());
    size_t qi = 0;
    while (qi < q.size()) {
      int u = q[qi++];
      order.push_back(u);
      for (int v : succs[static_cast<size_t>(u)])
        if (--indeg[static_cast<size_t>(v)] == 0) q.push_back(v);
    }
    if (order.size() != static_cast<size_t>(n)) throw CycleError("run_graph: not a DAG");
  }

  auto slot_of = [&](int id) -> Id {
    auto it = slots.find(id);
    if (it == slots.end())
      throw ShapeMismatch("missing parameter slot for node " + std::to_string(id));
    return it->second;
  };

  std::vector<Id> out(static_cast<size_t>(n), Tape<S>::kNone);
  Id logits = Tape<S>::kNone;
  for (int id : order) {
    const ArchNode& nd = g.nodes[static_cast<size_t>(id)];
    const auto& ps = preds[static_cast<size_t>(id)];
    std::vector<Id> in;
    in.reserve(ps.size());
    for (int p : ps) in.push_back(out[static_cast<size_t>(p)]);

    Id y = Tape<S>::kNone;
    switch (nd.op) {
      case OpKind::kInput:
        y = x_input;
        break;
      case OpKind::kConv2d: {
        if (t.val(in[0]).rank() != 4) throw ShapeMismatch("conv2d input must be 4-D");
        y = ops::conv2d(t, in[0], slot_of(id), nd.attrs.stride, nd.attrs.padding);
        break;
      }
      case OpKind::kLinear:
      case OpKind::kClassifierHead: {
        if (t.val(in[0]).rank() != 2)
          throw ShapeMismatch(std::string(op_name(nd.op)) + " input must be 2-D (pool first)");
        Id w = slot_of(id);
        if (t.val(w).shape[1] != t.val(in[0]).shape[1])
          throw ShapeMismatch(std::string(op_name(nd.op)) + " weight/input feature mismatch");
        y = ops::linear(t, in[0], w);
        break;
      }
      case OpKind::kBatchNorm: {
        Id w = slot_of(id);
        if (nd.attrs.bn_role == BnRole::kScale) {
          if (bn_mode == BnMode::kRunningEval) {
            if (!running) throw ShapeMismatch("running stats required for eval-mode BN");
            auto& mv = running->stats.at(id);
            std::pair<const std::vector<S>*, const std::vector<S>*> rs{&mv.first, &mv.second};
            y = ops::bn_scale(t, in[0], w, S(1e-5), &rs);
          } else {
            ops::BnStats<S> st;
            y = ops::bn_scale(t, in[0], w, S(1e-5), nullptr,
                              bn_mode == BnMode::kRunningUpdate ? &st : nullptr);
            if (bn_mode == BnMode::kRunningUpdate && running) {
              int64_t C = t.val(in[0]).shape[1];
              int64_t sp = t.val(in[0]).rank() == 4
                               ? t.val(in[0]).shape[2] * t.val(in[0]).shape[3]
                               : 1;
              int64_t N = t.val(in[0]).shape[0] * sp;
              auto& mv = running->stats[id];
              if (mv.first.empty()) {
                mv.first.assign(static_cast<size_t>(C), S(0));
                mv.second.assign(static_cast<size_t>(C), S(1));
              }
              double mom = running->momentum;
              double unbias = N > 1 ? static_cast<double>(N) / static_cast<double>(N - 1) : 1.0;
              for (int64_t c = 0; c < C; ++c) {
                mv.first[static_cast<size_t>(c)] =
                    static_cast<S>((1 - mom) * mv.first[static_cast<size_t>(c)] +
                                   mom * st.mean[static_cast<size_t>(c)]);
                mv.second[static_cast<size_t>(c)] =
                    static_cast<S>((1 - mom) * mv.second[static_cast<size_t>(c)] +
                                   mom * unbias * st.var[static_cast<size_t>(c)]);
              }
            }
          }
        } else {
          y = ops::bn_shift(t, in[0], w);
        }
        break;
      }
      case OpKind::kRelu:
        y = ops::relu(t, in[0]);
        break;
      case OpKind::kSilu:
        y = ops::silu(t, in[0]);
        break;
      case OpKind::kMaxPool:
        y = ops::maxpool(t, in[0], nd.attrs.kernel, nd.attrs.stride);
        break;
      case OpKind::kAvgPool:
        y = ops::avgpool(t, in[0], nd.attrs.kernel, nd.attrs.stride);
        break;
      case OpKind::kGlobalAvgPool:
        y = ops::global_avg_pool(t, in[0]);
        break;
      case OpKind::kAdd:
        y = ops::add_many(t, in);
        break;
      case OpKind::kConcat:
        y = ops::concat_channels(t, in);
        break;
    }

    const auto& v = t.val(y);
    if (!v.all_finite())
      throw NonFiniteActivation(id, "non-finite activation at node " + std::to_string(id) +
                                        " (" + op_name(nd.op) + ") in " + g.name);
    if (trace && is_conv_or_linear(nd.op)) {
      double mean = 0;
      for (S x : v.data) mean += static_cast<double>(x);
      mean /= static_cast<double>(v.numel());
      double var = 0;
      for (S x : v.data) {
        double c = static_cast<double>(x) - mean;
        var += c * c;
      }
      var /= static_cast<double>(v.numel());
      trace->variances.emplace_back(id, var);
    }
    out[static_cast<size_t>(id)] = y;
    if (nd.op == OpKind::kClassifierHead) logits = y;
  }
  return logits;
}

// Value-level forward: logits for a batch under a given parameter set.
template <class S>
std::pair<Tensor<S>, ActivationTrace> forward(const ArchGraph& g, const ParamSet<S>& p,
                                              const Batch& batch, bool trace = false,
                                              BnMode bn_mode = BnMode::kBatch,
                                              BnRunning<S>* running = nullptr) {
  Tape<S> t(false);
  std::map<int, typename Tape<S>::Id> slots;
  for (const auto& [id, tensor] : p.tensors) slots[id] = t.constant(tensor);
  typename Tape<S>::Id x = t.constant(batch.images.template cast<S>());
  ActivationTrace tr;
  auto logits = run_graph(t, g, slots, x, bn_mode, running, trace ? &tr : nullptr);
  return {t.val(logits), std::move(tr)};
}

// Mean cross-entropy and gradients w.r.t. every slot tensor.
template <class S>
std::pair<double, std::map<int, Tensor<S>>> loss_and_grads(const ArchGraph& g,
                                                           const ParamSet<S>& p,
                                                           const Batch& batch,
                                                           BnMode bn_mode = BnMode::kBatch,
                                                           BnRunning<S>* running = nullptr) {
  Tape<S> t;
  std::vector<Parameter<S>> params;
  params.reserve(p.tensors.size());
  std::map<int, typename Tape<S>::Id> slots;
  for (const auto& [id, tensor] : p.tensors) {
    params.emplace_back("slot" + std::to_string(id), tensor);
    slots[id] = t.param(params.back());
  }
  typename Tape<S>::Id x = t.constant(batch.images.template cast<S>());
  auto logits = run_graph(t, g, slots, x, bn_mode, running, nullptr);
  auto loss = ops::softmax_cross_entropy(t, logits, batch.labels);
  t.backward(loss);
  std::map<int, Tensor<S>> grads;
  size_t i = 0;
  for (const auto& [id, tensor] : p.tensors) {
    (void)tensor;
    grads[id] = std::move(params[i].grad);
    ++i;
  }
  return {static_cast<double>(t.val(loss)[0]), std::move(grads)};
}

// Top-1 accuracy of logits against labels, in percent.
template <class S>
double top1_accuracy(const Tensor<S>& logits, const std::vector<int>& labels) {
  int64_t b = logits.shape[0], c = logits.shape[1];
  int64_t hits = 0;
  for (int64_t i = 0; i < b; ++i) {
    int64_t best = 0;
    for (int64_t j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    if (best == labels[static_cast<size_t>(i)]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(b);
}

}  // namespace ghnforge
