#include "ghnforge/evalkit/eval.hpp"

#include <cstdio>
#include <fstream>

namespace ghnforge {

ParamSet<float> predict_param_set(GhnModel<float>& model, const ArchGraph& g,
                                  uint64_t fallback_seed) {
  Tape<float> tape(false);
  GraphFeatures feat = compute_features(g, model.cfg.max_dist);
  auto pp = predict_params(tape, g, feat, model, fallback_seed);
  return to_param_set(tape, pp);
}

EvalReport eval_no_finetune(GhnModel<float>& model, const std::vector<ArchGraph>& archs,
                            const Dataset& ds, int val_batch) {
  EvalReport rep;
  rep.top10_rule = "10 best rows by no-fine-tune accuracy";
  for (const auto& g : archs) {
    EvalRow row;
    row.arch = g.name;
    row.init = "predicted";
    row.steps = 0;
    try {
      ParamSet<float> p = predict_param_set(model, g, fnv1a64(g.name));
      row.acc = evaluate_params(g, p, ds.val_x, ds.val_y, val_batch, BnMode::kBatch);
    } catch (const std::exception&) {
      row.failed = true;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

EvalReport compare_inits(GhnModel<float>& model, const std::vector<ArchGraph>& archs,
                         const Dataset& ds, const CompareConfig& cfg) {
  EvalReport rep;
  rep.top10_rule = "10 best rows by accuracy after the fine-tune sweep";
  for (size_t ai = 0; ai < archs.size(); ++ai) {
    const auto& g = archs[ai];
    SgdSchedule sched = cfg.sched;
    sched.seed = derive_seed(cfg.seed, {0x5feed, ai});

    // predicted arm, with symmetry-breaking noise
    {
      EvalRow row;
      row.arch = g.name;
      row.init = "predicted";
      row.steps = sched.steps;
      try {
        ParamSet<float> p = predict_param_set(model, g, fnv1a64(g.name));
        Rng noise_rng(derive_seed(cfg.seed, {0xbe7a, ai}));
        p = add_symmetry_noise(p, cfg.noise_beta, noise_rng);
        auto [pf, log] = sgd_finetune(g, p, ds, sched);
        (void)pf;
        row.acc = log.best_acc;
        row.lr = log.best_lr;
      } catch (const std::exception&) {
        row.failed = true;
      }
      rep.rows.push_back(row);
    }
    // random arm
    {
      EvalRow row;
      row.arch = g.name;
      row.init = "random";
      row.steps = sched.steps;
      try {
        Rng rng(derive_seed(cfg.seed, {0x2a2d, ai}));
        ParamSet<float> p = random_init<float>(g, rng);
        auto [pf, log] = sgd_finetune(g, p, ds, sched);
        (void)pf;
        row.acc = log.best_acc;
        row.lr = log.best_lr;
      } catch (const std::exception&) {
        row.failed = true;
      }
      rep.rows.push_back(row);
    }
  }
  return rep;
}

std::vector<int64_t> transfer_subset_indices(int64_t n_train, int subset, uint64_t seed) {
  auto perm = epoch_permutation(n_train, derive_seed(seed, {0x5fbb}), 0);
  perm.resize(static_cast<size_t>(std::min<int64_t>(subset, n_train)));
  return perm;
}

EvalReport transfer_eval(GhnModel<float>& model, const std::vector<ArchGraph>& archs,
                         const Dataset& src, const Dataset& dst, const TransferConfig& cfg) {
  // few-shot target task: fixed subset of the target training split
  auto idx = transfer_subset_indices(dst.train_x.shape[0], cfg.subset, cfg.seed);
  Dataset few;
  few.cfg = dst.cfg;
  few.cfg.n_train = static_cast<int>(idx.size());
  Batch sub = make_batch(dst.train_x, dst.train_y, idx);
  few.train_x = std::move(sub.images);
  few.train_y = std::move(sub.labels);
  few.val_x = dst.val_x;
  few.val_y = dst.val_y;

  EvalReport rep;
  rep.top10_rule = "10 best rows by transfer accuracy";
  for (size_t ai = 0; ai < archs.size(); ++ai) {
    const auto& g = archs[ai];
    EvalRow row;
    row.arch = g.name;
    row.init = "predicted";
    row.steps = cfg.sched.steps;
    try {
      ParamSet<float> p = predict_param_set(model, g, fnv1a64(g.name));
      Rng noise_rng(derive_seed(cfg.seed, {0xbe7a, ai}));
      p = add_symmetry_noise(p, cfg.noise_beta, noise_rng);
      if (cfg.src_finetune_steps > 0) {
        SgdSchedule pre = cfg.sched;
        pre.steps = cfg.src_finetune_steps;
        pre.seed = derive_seed(cfg.seed, {0x50c, ai});
        auto [pp, plog] = sgd_finetune(g, p, src, pre);
        (void)plog;
        p = std::move(pp);
      }
      Rng head_rng(derive_seed(cfg.seed, {0x4ead, ai}));
      p = reinit_head(g, p, dst.cfg.classes, head_rng);
      SgdSchedule sched = cfg.sched;
      sched.seed = derive_seed(cfg.seed, {0xd57, ai});
      auto [pf, log] = sgd_finetune(g, p, few, sched);
      (void)pf;
      row.acc = log.best_acc;
      row.lr = log.best_lr;
    } catch (const std::exception&) {
      row.failed = true;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

VarianceSeries variance_probe(const ArchGraph& g,
                              const std::vector<std::pair<std::string, ParamSet<float>>>& inits,
                              const Batch& batch) {
  VarianceSeries out;
  for (const auto& [name, p] : inits) {
    auto [logits, trace] = forward<float>(g, p, batch, true, BnMode::kBatch);
    (void)logits;
    if (out.node_ids.empty())
      for (auto [id, var] : trace.variances) out.node_ids.push_back(id);
    std::vector<double> vars;
    for (auto [id, var] : trace.variances) vars.push_back(var);
    out.inits.push_back(name);
    out.vars.push_back(std::move(vars));
  }
  return out;
}

void write_variance_csv(const VarianceSeries& vs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write variance series: " + path);
  out << "layer,node_id";
  for (const auto& n : vs.inits) out << "," << n;
  out << "\n";
  for (size_t l = 0; l < vs.node_ids.size(); ++l) {
    out << l << "," << vs.node_ids[l];
    char buf[48];
    for (size_t i = 0; i < vs.inits.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.9g", vs.vars[i][l]);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace ghnforge
