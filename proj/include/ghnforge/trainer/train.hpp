#pragma once

#include <string>

#include "ghnforge/ghn/checkpoint.hpp"
#include "ghnforge/ghn/decoder.hpp"
#include "ghnforge/target_net/dataset.hpp"
#include "ghnforge/trainer/optim.hpp"

namespace ghnforge {

enum class RegForm : uint8_t { kGroupL2 = 0, kSquared = 1, kNone = 2 };

RegForm reg_form_from_name(const std::string& name);  // throws ConfigError
const char* reg_form_name(RegForm f);

// Hypernetwork training configuration. Reference values follow the full-scale
// protocol (lr 4e-4 cosine, weight decay 1e-2, regularization 3e-5, 75
// epochs, batch 128); desk experiment configs scale the budget down.
struct TrainConfig {
  int epochs = 75;
  double lr = 4e-4;
  double weight_decay = 1e-2;  // on hypernetwork parameters only
  double reg_coef = 3e-5;      // gamma, on predicted parameters
  RegForm reg_form = RegForm::kGroupL2;
  int meta_batch = 8;  // m
  int data_batch = 128;
  int shards = 1;
  uint64_t seed = 42;
  std::string dataset_id = "synth10";
  std::string space_id = "space";
  int save_every_epochs = 0;  // 0 = final checkpoint only
  bool detach_ce = false;     // test hook: cut the CE gradient path

  void validate() const;
};

// Sum over parameter slots of the chosen penalty. The operation is defined on
// whatever tensors the set holds; the trainer applies it to predicted slots.
template <class S>
double reg_penalty(const ParamSet<S>& p, RegForm form) {
  if (form == RegForm::kNone) return 0.0;
  double total = 0;
  for (const auto& [id, t] : p.tensors) {
    if (form == RegForm::kGroupL2) {
      total += l2_norm(t);
    } else {
      for (S v : t.data) total += static_cast<double>(v) * static_cast<double>(v);
    }
  }
  return total;
}

// Gaussian symmetry-breaking perturbation; beta = 0 returns the set
// untouched (bit-identical).
template <class S>
ParamSet<S> add_symmetry_noise(const ParamSet<S>& p, double beta, Rng& rng) {
  if (beta < 0) throw ConfigError("symmetry noise beta must be >= 0");
  ParamSet<S> out = p;
  if (beta == 0.0) return out;
  for (auto& [id, t] : out.tensors)
    for (auto& v : t.data) v = static_cast<S>(static_cast<double>(v) + beta * rng.normal());
  return out;
}

struct StepStats {
  double loss = 0, ce = 0, reg = 0, grad_norm = 0;
};

// One meta-batch step: for each architecture predict parameters, forward the
// shared data batch, accumulate d(mean loss)/d(theta), then one optimizer
// step. Shards partition the architecture loop into groups whose gradients
// are averaged; every arch contributes grad/m, so the result is invariant to
// the shard count by construction. Throws NonFiniteLoss before any optimizer
// update if a per-arch loss is non-finite.
StepStats train_step(GhnModel<float>& model, const std::vector<const ArchGraph*>& archs,
                     const std::vector<const GraphFeatures*>& feats, const Batch& batch,
                     const TrainConfig& cfg, AdamW<float>& opt, double lr);

struct TrainOutput {
  int64_t total_steps = 0;
  std::string final_checkpoint;  // stem: "<stem>.ghn" + "<stem>.run"
  std::string metrics_csv;
};

// Full training loop with metrics CSV, periodic checkpoints and resume.
// Architecture meta-batches draw without replacement from per-epoch shuffles
// of the space; the data order is an independent stream. Both streams are
// derived statelessly from (seed, position), so a resumed run replays the
// exact schedule.
TrainOutput train(GhnModel<float>& model, const std::vector<ArchGraph>& space, const Dataset& ds,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const std::string& resume_stem = "");

// Optimizer-state (TrainRun) serialization; the model itself goes through
// save_ghn/load_ghn under the same stem.
void save_train_run(const AdamW<float>& opt, const GhnModel<float>& model, int64_t step,
                    const std::string& path);
int64_t load_train_run(AdamW<float>& opt, const GhnModel<float>& model, const std::string& path);

}  // namespace ghnforge
