#pragma once

#include <optional>

#include "ghnforge/target_net/dataset.hpp"

namespace ghnforge {

// Fine-tuning protocol: for each learning rate in the sweep, run SGD with
// momentum and weight decay from the same starting parameters and keep the
// runs' validation accuracies; the best run wins.
struct SgdSchedule {
  std::vector<double> lrs = {0.1, 0.04, 0.01};
  int steps = 200;  // total SGD steps per learning rate
  int batch = 64;
  double momentum = 0.9;
  double weight_decay = 3e-5;
  int val_batch = 256;
  uint64_t seed = 0;
};

struct LrRunLog {
  double lr = 0;
  double val_acc = 0;
  bool diverged = false;
  double final_loss = 0;
};

struct FinetuneLog {
  std::vector<LrRunLog> runs;
  double best_lr = 0;
  double best_acc = 0;
};

// Classical momentum update with coupled L2 decay:
//   v <- mu * v + (g + wd * w);  w <- w - lr * v
template <class S>
void sgd_momentum_step(Tensor<S>& w, const Tensor<S>& g, Tensor<S>& vel, double lr, double mu,
                       double wd) {
  for (int64_t i = 0; i < w.numel(); ++i) {
    double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
    double v = mu * static_cast<double>(vel[i]) + gi;
    vel[i] = static_cast<S>(v);
    w[i] = static_cast<S>(static_cast<double>(w[i]) - lr * v);
  }
}

// Top-1 validation accuracy with the given BN handling.
template <class S>
double evaluate_params(const ArchGraph& g, const ParamSet<S>& p, const Tensor<float>& xs,
                       const std::vector<int>& ys, int val_batch, BnMode bn_mode,
                       BnRunning<S>* running = nullptr) {
  int64_t n = xs.shape[0];
  int64_t hits = 0;
  for (int64_t off = 0; off < n; off += val_batch) {
    int64_t b = std::min<int64_t>(val_batch, n - off);
    std::vector<int64_t> idx(static_cast<size_t>(b));
    for (int64_t i = 0; i < b; ++i) idx[static_cast<size_t>(i)] = off + i;
    Batch batch = make_batch(xs, ys, idx);
    auto [logits, tr] = forward<S>(g, p, batch, false, bn_mode, running);
    (void)tr;
    for (int64_t i = 0; i < b; ++i) {
      int64_t best = 0;
      for (int64_t j = 1; j < logits.shape[1]; ++j)
        if (logits.at(i, j) > logits.at(i, best)) best = j;
      if (best == batch.labels[static_cast<size_t>(i)]) ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

// One SGD run at a fixed lr. Returns nullopt if the loss went non-finite.
template <class S>
std::optional<std::pair<ParamSet<S>, LrRunLog>> sgd_run(const ArchGraph& g, const ParamSet<S>& p0,
                                                        const Dataset& ds,
                                                        const SgdSchedule& sched, double lr) {
  ParamSet<S> p = p0;
  std::map<int, Tensor<S>> vel;
  for (const auto& [id, t] : p.tensors) vel[id] = Tensor<S>(t.shape);
  BnRunning<S> running;

  LrRunLog log;
  log.lr = lr;
  int64_t n = ds.train_x.shape[0];
  int64_t steps_per_epoch = std::max<int64_t>(1, n / sched.batch);
  // the data order is shared across the lr sweep so runs differ only in lr
  for (int step = 0; step < sched.steps; ++step) {
    int64_t epoch = step / steps_per_epoch;
    int64_t pos = step % steps_per_epoch;
    auto perm = epoch_permutation(n, derive_seed(sched.seed, {0xf17e}), epoch);
    std::vector<int64_t> idx(perm.begin() + pos * sched.batch,
                             perm.begin() + std::min<int64_t>(n, (pos + 1) * sched.batch));
    Batch batch = make_batch(ds.train_x, ds.train_y, idx);
    double loss;
    std::map<int, Tensor<S>> grads;
    try {
      std::tie(loss, grads) = loss_and_grads(g, p, batch, BnMode::kRunningUpdate, &running);
    } catch (const NonFiniteActivation&) {
      log.diverged = true;
      return std::nullopt;
    }
    if (!std::isfinite(loss)) {
      log.diverged = true;
      return std::nullopt;
    }
    log.final_loss = loss;
    for (auto& [id, t] : p.tensors)
      sgd_momentum_step(t, grads.at(id), vel.at(id), lr, sched.momentum, sched.weight_decay);
  }
  log.val_acc =
      evaluate_params(g, p, ds.val_x, ds.val_y, sched.val_batch, BnMode::kRunningEval, &running);
  return std::make_pair(std::move(p), log);
}

// Learning-rate sweep; returns the best run's parameters and the full log.
// A diverged run is recorded per-lr and does not abort the sweep; if every
// run diverges, DivergedError is thrown.
template <class S>
std::pair<ParamSet<S>, FinetuneLog> sgd_finetune(const ArchGraph& g, const ParamSet<S>& p0,
                                                 const Dataset& ds, const SgdSchedule& sched) {
  FinetuneLog log;
  std::optional<ParamSet<S>> best;
  for (double lr : sched.lrs) {
    auto res = sgd_run(g, p0, ds, sched, lr);
    if (!res) {
      LrRunLog l;
      l.lr = lr;
      l.diverged = true;
      log.runs.push_back(l);
      continue;
    }
    log.runs.push_back(res->second);
    if (!best || res->second.val_acc > log.best_acc) {
      log.best_acc = res->second.val_acc;
      log.best_lr = lr;
      best = std::move(res->first);
    }
  }
  if (!best) throw DivergedError("every learning rate diverged for " + g.name);
  return {std::move(*best), std::move(log)};
}

}  // namespace ghnforge
