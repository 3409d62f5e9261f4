#pragma once

#include "ghnforge/evalkit/eval.hpp"

namespace ghnforge {

// One cell of the ablation grid: encoder feature switches plus the predicted
// parameter regularization coefficient.
struct AblationCell {
  std::string name;
  bool use_sa = true, use_fw = true, use_bw = true;
  double gamma = 3e-5;
};

// The four standard rows: full model, no backward edge embedding, plain
// self-attention without edge embeddings, and the per-node MLP with no
// attention at all.
std::vector<AblationCell> standard_ablation_cells(double gamma = 3e-5);

struct AblationResult {
  std::string cell;
  double gamma = 0;
  uint64_t seed = 0;
  double heldout_acc = 0;       // mean no-fine-tune accuracy on held-out archs
  double mean_abs_wpred = 0;    // mean |w_pred| over held-out predictions
  double median_act_var = 0;    // median per-layer activation variance, held-out
};

// Trains one small GHN per (cell, seed) with a shared base config and reports
// the held-out no-fine-tune metric per cell. Per-cell failures are recorded
// as failed rows rather than aborting the grid.
std::vector<AblationResult> ablation_sweep(const std::vector<ArchGraph>& train_space,
                                           const std::vector<ArchGraph>& heldout,
                                           const Dataset& ds, const GhnConfig& base_cfg,
                                           const TrainConfig& base_train,
                                           const std::vector<AblationCell>& cells,
                                           const std::vector<uint64_t>& seeds,
                                           const std::string& work_dir);

void write_ablation_csv(const std::vector<AblationResult>& rows, const std::string& path);

}  // namespace ghnforge
