#include "ghnforge/trainer/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ghnforge {

namespace fs = std::filesystem;

RegForm reg_form_from_name(const std::string& name) {
  if (name == "group_l2") return RegForm::kGroupL2;
  if (name == "squared") return RegForm::kSquared;
  if (name == "none") return RegForm::kNone;
  throw ConfigError("unknown reg_form: '" + name + "'");
}

const char* reg_form_name(RegForm f) {
  switch (f) {
    case RegForm::kGroupL2: return "group_l2";
    case RegForm::kSquared: return "squared";
    default: return "none";
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (lr <= 0) throw ConfigError("train.lr must be > 0");
  if (weight_decay < 0 || reg_coef < 0) throw ConfigError("train decay/reg must be >= 0");
  if (meta_batch < 1) throw ConfigError("train.meta_batch must be >= 1");
  if (data_batch < 1) throw ConfigError("train.data_batch must be >= 1");
  if (shards < 1 || shards > meta_batch)
    throw ConfigError("train.shards must be in [1, meta_batch]");
}

StepStats train_step(GhnModel<float>& model, const std::vector<const ArchGraph*>& archs,
                     const std::vector<const GraphFeatures*>& feats, const Batch& batch,
                     const TrainConfig& cfg, AdamW<float>& opt, double lr) {
  const int m = static_cast<int>(archs.size());
  if (m != cfg.meta_batch)
    throw ConfigError("train_step: meta-batch size mismatch");
  model.zero_grads();

  StepStats st;
  const float inv_m = 1.0f / static_cast<float>(m);
  // shard boundaries: shard s covers [s*m/shards, (s+1)*m/shards)
  for (int s = 0; s < cfg.shards; ++s) {
    int a0 = s * m / cfg.shards;
    int a1 = (s + 1) * m / cfg.shards;
    for (int a = a0; a < a1; ++a) {
      Tape<float> tape;
      auto pp = predict_params(tape, *archs[static_cast<size_t>(a)],
                               *feats[static_cast<size_t>(a)], model,
                               derive_seed(cfg.seed, {0xfb, fnv1a64(archs[static_cast<size_t>(a)]->name)}));
      auto x = tape.constant(batch.images);
      auto logits = run_graph(tape, *archs[static_cast<size_t>(a)], pp.slots, x, BnMode::kBatch);
      auto ce = ops::softmax_cross_entropy(tape, logits, batch.labels);

      Tape<float>::Id reg = Tape<float>::kNone;
      if (cfg.reg_form != RegForm::kNone && cfg.reg_coef > 0) {
        for (const auto& [id, slot] : pp.slots) {
          if (pp.source.at(id) != ParamSource::kPredicted) continue;
          auto term = cfg.reg_form == RegForm::kGroupL2 ? ops::l2_norm_scalar(tape, slot)
                                                        : ops::sum_sq(tape, slot);
          reg = reg == Tape<float>::kNone ? term : ops::add(tape, reg, term);
        }
      }

      double ce_v = static_cast<double>(tape.val(ce)[0]);
      double reg_v = reg == Tape<float>::kNone ? 0.0 : static_cast<double>(tape.val(reg)[0]);
      double loss_v = ce_v + cfg.reg_coef * reg_v;
      if (!std::isfinite(loss_v))
        throw NonFiniteLoss(archs[static_cast<size_t>(a)]->name,
                            "non-finite loss for arch " + archs[static_cast<size_t>(a)]->name);
      st.ce += ce_v / m;
      st.reg += reg_v / m;
      st.loss += loss_v / m;

      Tape<float>::Id total;
      if (reg != Tape<float>::kNone) {
        auto scaled = ops::scale(tape, reg, static_cast<float>(cfg.reg_coef));
        total = cfg.detach_ce ? scaled : ops::add(tape, ce, scaled);
      } else {
        if (cfg.detach_ce) continue;  // nothing to backprop
        total = ce;
      }
      tape.backward(total, inv_m);
    }
  }
  st.grad_norm = model.grad_norm();
  opt.step(model.params(), lr, cfg.weight_decay);
  return st;
}

namespace {

// Architecture stream: concatenated per-epoch shuffles of the space; entry q
// of the stream is perm(seed, q / N)[q % N].
int64_t arch_at(uint64_t seed, int64_t n_archs, int64_t q) {
  int64_t k = q / n_archs, r = q % n_archs;
  auto perm = epoch_permutation(n_archs, derive_seed(seed, {0xa5c4}), k);
  return perm[static_cast<size_t>(r)];
}

}  // namespace

void save_train_run(const AdamW<float>& opt, const GhnModel<float>& model, int64_t step,
                    const std::string& path) {
  BinWriter w(path);
  w.u32(0x4e524647);  // "GFRN"
  w.u32(1);
  w.i64(step);
  w.i64(opt.t);
  w.u32(static_cast<uint32_t>(model.params().size()));
  for (size_t i = 0; i < model.params().size(); ++i) {
    w.str(model.params()[i].name);
    write_tensor_f32(w, opt.m[i]);
    write_tensor_f32(w, opt.v[i]);
  }
}

int64_t load_train_run(AdamW<float>& opt, const GhnModel<float>& model, const std::string& path) {
  BinReader r(path);
  if (r.u32() != 0x4e524647) throw IoError("not a train-run blob: " + path);
  if (r.u32() != 1) throw IoError("unsupported train-run version: " + path);
  int64_t step = r.i64();
  opt.init(model.params());
  opt.t = r.i64();
  uint32_t n = r.u32();
  if (n != model.params().size()) throw IoError("train-run parameter count mismatch: " + path);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    if (name != model.params()[i].name)
      throw IoError("train-run parameter order mismatch at " + name + ": " + path);
    opt.m[i] = read_tensor_f32<float>(r);
    opt.v[i] = read_tensor_f32<float>(r);
  }
  return step;
}

TrainOutput train(GhnModel<float>& model, const std::vector<ArchGraph>& space, const Dataset& ds,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const std::string& resume_stem) {
  cfg.validate();
  if (space.empty()) throw ConfigError("train: empty architecture space");
  fs::create_directories(out_dir);

  std::vector<GraphFeatures> feats;
  feats.reserve(space.size());
  for (const auto& g : space) feats.push_back(compute_features(g, model.cfg.max_dist));

  const int64_t n_train = ds.train_x.shape[0];
  const int64_t steps_per_epoch = std::max<int64_t>(1, n_train / cfg.data_batch);
  const int64_t total_steps = steps_per_epoch * cfg.epochs;

  AdamW<float> opt;
  opt.init(model.params());
  int64_t start_step = 0;
  if (!resume_stem.empty()) {
    GhnModel<float> loaded = load_ghn<float>(resume_stem + ".ghn");
    for (size_t i = 0; i < model.params().size(); ++i)
      model.params()[i].value = loaded.params()[i].value;
    start_step = load_train_run(opt, model, resume_stem + ".run");
  }

  std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  bool fresh = !fs::exists(metrics_path) || start_step == 0;
  std::ofstream metrics(metrics_path,
                        fresh ? (std::ios::out | std::ios::trunc) : (std::ios::out | std::ios::app));
  if (!metrics) throw IoError("cannot write metrics: " + metrics_path);
  if (fresh) metrics << "step,lr,ce,reg,grad_norm,wall_ms\n";

  auto save_stem = [&](const std::string& stem) {
    save_ghn(model, stem + ".ghn");
    save_train_run(opt, model, opt.t, stem + ".run");
  };

  const uint64_t data_seed = derive_seed(cfg.seed, {0xda7a});
  TrainOutput out;
  out.metrics_csv = metrics_path;
  char row[256];
  for (int64_t step = start_step; step < total_steps; ++step) {
    int64_t epoch = step / steps_per_epoch;
    int64_t pos = step % steps_per_epoch;
    auto perm = epoch_permutation(n_train, data_seed, epoch);
    std::vector<int64_t> idx(perm.begin() + pos * cfg.data_batch,
                             perm.begin() + (pos + 1) * cfg.data_batch);
    Batch batch = make_batch(ds.train_x, ds.train_y, idx);

    std::vector<const ArchGraph*> archs;
    std::vector<const GraphFeatures*> fs_ptrs;
    for (int a = 0; a < cfg.meta_batch; ++a) {
      int64_t gi = arch_at(cfg.seed, static_cast<int64_t>(space.size()),
                           step * cfg.meta_batch + a);
      archs.push_back(&space[static_cast<size_t>(gi)]);
      fs_ptrs.push_back(&feats[static_cast<size_t>(gi)]);
    }

    double lr = cosine_lr(cfg.lr, step, total_steps);
    auto t0 = std::chrono::steady_clock::now();
    StepStats st;
    try {
      st = train_step(model, archs, fs_ptrs, batch, cfg, opt, lr);
    } catch (const NonFiniteLoss&) {
      save_stem((fs::path(out_dir) / "ckpt_abort").string());
      throw;
    }
    double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::snprintf(row, sizeof(row), "%lld,%.10g,%.10g,%.10g,%.10g,%.3f\n",
                  static_cast<long long>(step), lr, st.ce, st.reg, st.grad_norm, wall_ms);
    metrics << row;

    bool epoch_end = pos == steps_per_epoch - 1;
    if (cfg.save_every_epochs > 0 && epoch_end && (epoch + 1) % cfg.save_every_epochs == 0 &&
        step + 1 < total_steps) {
      save_stem((fs::path(out_dir) / ("ckpt_step" + std::to_string(step + 1))).string());
    }
  }
  metrics.flush();

  std::string final_stem = (fs::path(out_dir) / "ckpt_final").string();
  save_stem(final_stem);
  out.total_steps = total_steps;
  out.final_checkpoint = final_stem;
  return out;
}

}  // namespace ghnforge
