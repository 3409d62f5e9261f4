#pragma once

#include "ghnforge/evalkit/report.hpp"
#include "ghnforge/evalkit/stats.hpp"
#include "ghnforge/ghn/decoder.hpp"
#include "ghnforge/target_net/finetune.hpp"
#include "ghnforge/trainer/train.hpp"

namespace ghnforge {

// Predicts parameters for one architecture on an inference tape and returns
// the concrete tensors.
ParamSet<float> predict_param_set(GhnModel<float>& model, const ArchGraph& g,
                                  uint64_t fallback_seed = 0);

// Direct evaluation of predicted parameters, zero gradient steps. BN uses the
// batch statistics of each evaluation batch (predicted BN running stats do
// not exist). Per-arch failures are recorded in the row, not fatal.
EvalReport eval_no_finetune(GhnModel<float>& model, const std::vector<ArchGraph>& archs,
                            const Dataset& ds, int val_batch = 256);

struct CompareConfig {
  SgdSchedule sched;
  double noise_beta = 1e-5;  // on predicted parameters before fine-tuning
  uint64_t seed = 0;
};

// For each arch, fine-tunes predicted (+noise) and random initializations at
// the same budget with the same lr sweep; rows pair up by arch name for
// win-rate tables.
EvalReport compare_inits(GhnModel<float>& model, const std::vector<ArchGraph>& archs,
                         const Dataset& ds, const CompareConfig& cfg);

struct TransferConfig {
  SgdSchedule sched;
  int subset = 1000;           // few-shot training samples from the target task
  int src_finetune_steps = 0;  // optional source fine-tune before transfer
  double noise_beta = 1e-5;
  uint64_t seed = 0;
};

// Source-task prediction, optional source fine-tune, classifier-head reinit
// to the target class count, then few-shot fine-tuning on the target task.
// The subset selection is deterministic in cfg.seed.
EvalReport transfer_eval(GhnModel<float>& model, const std::vector<ArchGraph>& archs,
                         const Dataset& src, const Dataset& dst, const TransferConfig& cfg);

// Deterministic few-shot subset: first `subset` entries of the seed-derived
// permutation of the target training split.
std::vector<int64_t> transfer_subset_indices(int64_t n_train, int subset, uint64_t seed);

// Aligned per-layer activation-variance series for several parameter sets on
// the same mini-batch.
struct VarianceSeries {
  std::vector<int> node_ids;              // conv/linear nodes in execution order
  std::vector<std::string> inits;         // column names
  std::vector<std::vector<double>> vars;  // vars[init][layer]
};

VarianceSeries variance_probe(const ArchGraph& g,
                              const std::vector<std::pair<std::string, ParamSet<float>>>& inits,
                              const Batch& batch);

void write_variance_csv(const VarianceSeries& vs, const std::string& path);

}  // namespace ghnforge
