#include "ghnforge/cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ghnforge/archgraph/spacegen.hpp"
#include "ghnforge/core/hash.hpp"
#include "ghnforge/core/parallel.hpp"
#include "ghnforge/core/toml.hpp"
#include "ghnforge/evalkit/ablate.hpp"
#include "ghnforge/trainer/train.hpp"

namespace ghnforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_git_hash() {
  // best effort: resolve HEAD from the repository this binary runs in
  fs::path dir = fs::current_path();
  for (int up = 0; up < 6; ++up) {
    fs::path head = dir / ".git" / "HEAD";
    if (fs::exists(head)) {
      std::ifstream in(head);
      std::string line;
      std::getline(in, line);
      if (line.rfind("ref: ", 0) == 0) {
        std::ifstream ref(dir / ".git" / line.substr(5));
        std::string h;
        if (ref && std::getline(ref, h)) return h;
        return "unknown";
      }
      return line;
    }
    if (!dir.has_parent_path() || dir.parent_path() == dir) break;
    dir = dir.parent_path();
  }
  return "unknown";
}

// Written before any heavy work; contains no wallclock fields so reruns with
// the same config and seed produce byte-identical manifests.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, uint64_t seed) {
  fs::create_directories(out_dir);
  json m{{"command", command},
         {"config", config_path},
         {"config_hash", hex64(hash_file(config_path))},
         {"git_hash", read_git_hash()},
         {"seed", seed},
         {"tool", "ghnforge"},
         {"format_version", 1}};
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write manifest in " + out_dir);
  out << m.dump(2) << "\n";
}

std::optional<uint64_t> env_seed() {
  const char* s = std::getenv("GHNFORGE_SEED");
  if (!s || !*s) return std::nullopt;
  return std::strtoull(s, nullptr, 10);
}

// ---- section parsers ----

ArchSpaceConfig parse_space(const TomlValue& root) {
  const TomlValue& s = root.require("space", "config");
  ArchSpaceConfig cfg;
  cfg.n_archs = static_cast<int>(s.get_int("n_archs", cfg.n_archs));
  if (const TomlValue* d = s.find("depth")) {
    auto v = d->as_int_array("space.depth");
    if (v.size() != 2) throw ConfigError("space.depth must be [min, max]");
    cfg.depth_min = static_cast<int>(v[0]);
    cfg.depth_max = static_cast<int>(v[1]);
  }
  if (const TomlValue* c = s.find("channels")) {
    auto v = c->as_int_array("space.channels");
    if (v.size() != 2) throw ConfigError("space.channels must be [min, max]");
    cfg.channels_min = static_cast<int>(v[0]);
    cfg.channels_max = static_cast<int>(v[1]);
  }
  cfg.residual_p = s.get_float("residual_p", cfg.residual_p);
  cfg.concat_p = s.get_float("concat_p", cfg.concat_p);
  cfg.bn_p = s.get_float("bn_p", cfg.bn_p);
  if (const TomlValue* a = s.find("activations")) {
    cfg.activations.clear();
    for (const auto& name : a->as_str_array("space.activations"))
      cfg.activations.push_back(op_from_name(name));
  }
  cfg.rng_seed = static_cast<uint64_t>(s.get_int("seed", static_cast<int64_t>(cfg.rng_seed)));
  cfg.classes = static_cast<int>(s.get_int("classes", cfg.classes));
  cfg.input_hw = static_cast<int>(s.get_int("input_hw", cfg.input_hw));
  cfg.name_prefix = s.get_str("name_prefix", cfg.name_prefix);
  cfg.validate();
  return cfg;
}

DatasetConfig parse_dataset(const TomlValue& root) {
  DatasetConfig cfg;
  const TomlValue* s = root.find("dataset");
  if (!s) {
    cfg.validate();
    return cfg;
  }
  cfg.name = s->get_str("name", cfg.name);
  cfg.classes = static_cast<int>(s->get_int("classes", cfg.classes));
  cfg.n_train = static_cast<int>(s->get_int("n_train", cfg.n_train));
  cfg.n_val = static_cast<int>(s->get_int("n_val", cfg.n_val));
  cfg.hw = static_cast<int>(s->get_int("hw", cfg.hw));
  cfg.seed = static_cast<uint64_t>(s->get_int("seed", static_cast<int64_t>(cfg.seed)));
  cfg.style_seed =
      static_cast<uint64_t>(s->get_int("style_seed", static_cast<int64_t>(cfg.style_seed)));
  cfg.noise = s->get_float("noise", cfg.noise);
  cfg.validate();
  return cfg;
}

GhnConfig parse_ghn(const TomlValue& root) {
  GhnConfig cfg;
  const TomlValue* s = root.find("ghn");
  if (!s) {
    cfg.validate();
    return cfg;
  }
  if (const TomlValue* p = s->find("preset")) cfg = GhnConfig::preset(p->as_str("ghn.preset"));
  cfg.layers = static_cast<int>(s->get_int("layers", cfg.layers));
  cfg.hidden = static_cast<int>(s->get_int("hidden", cfg.hidden));
  cfg.heads = static_cast<int>(s->get_int("heads", cfg.heads));
  cfg.max_dist = static_cast<int>(s->get_int("max_dist", cfg.max_dist));
  cfg.max_degree = static_cast<int>(s->get_int("max_degree", cfg.max_degree));
  cfg.use_sa = s->get_bool("use_sa", cfg.use_sa);
  cfg.use_fw_edges = s->get_bool("use_fw_edges", cfg.use_fw_edges);
  cfg.use_bw_edges = s->get_bool("use_bw_edges", cfg.use_bw_edges);
  cfg.use_centrality = s->get_bool("use_centrality", cfg.use_centrality);
  cfg.use_input_dist = s->get_bool("use_input_dist", cfg.use_input_dist);
  cfg.decoder_channel_mult =
      static_cast<int>(s->get_int("decoder_channel_mult", cfg.decoder_channel_mult));
  cfg.decoder_hidden_mult =
      static_cast<int>(s->get_int("decoder_hidden_mult", cfg.decoder_hidden_mult));
  cfg.per_layer_edge_bias = s->get_bool("per_layer_edge_bias", cfg.per_layer_edge_bias);
  cfg.validate();
  return cfg;
}

TrainConfig parse_train(const TomlValue& root) {
  TrainConfig cfg;
  const TomlValue* s = root.find("train");
  if (!s) {
    cfg.validate();
    return cfg;
  }
  cfg.epochs = static_cast<int>(s->get_int("epochs", cfg.epochs));
  cfg.lr = s->get_float("lr", cfg.lr);
  cfg.weight_decay = s->get_float("weight_decay", cfg.weight_decay);
  cfg.reg_coef = s->get_float("reg_coef", cfg.reg_coef);
  cfg.reg_form = reg_form_from_name(s->get_str("reg_form", reg_form_name(cfg.reg_form)));
  cfg.meta_batch = static_cast<int>(s->get_int("meta_batch", cfg.meta_batch));
  cfg.data_batch = static_cast<int>(s->get_int("data_batch", cfg.data_batch));
  cfg.shards = static_cast<int>(s->get_int("shards", cfg.shards));
  cfg.seed = static_cast<uint64_t>(s->get_int("seed", static_cast<int64_t>(cfg.seed)));
  cfg.save_every_epochs = static_cast<int>(s->get_int("save_every_epochs", cfg.save_every_epochs));
  cfg.validate();
  return cfg;
}

SgdSchedule parse_sched(const TomlValue& s, const std::string& where) {
  SgdSchedule sched;
  if (const TomlValue* l = s.find("lrs")) sched.lrs = l->as_float_array(where + ".lrs");
  sched.steps = static_cast<int>(s.get_int("steps", sched.steps));
  sched.batch = static_cast<int>(s.get_int("batch", sched.batch));
  sched.momentum = s.get_float("momentum", sched.momentum);
  sched.weight_decay = s.get_float("weight_decay", sched.weight_decay);
  sched.val_batch = static_cast<int>(s.get_int("val_batch", sched.val_batch));
  if (sched.lrs.empty() || sched.steps < 0) throw ConfigError(where + ": invalid schedule");
  return sched;
}

const std::set<std::string> kSpaceKeys = {
    "space.n_archs", "space.depth",   "space.channels", "space.residual_p",
    "space.concat_p", "space.bn_p",   "space.activations", "space.seed",
    "space.classes", "space.input_hw", "space.name_prefix"};
const std::set<std::string> kDatasetKeys = {
    "dataset.dir",  "dataset.name",       "dataset.classes", "dataset.n_train",
    "dataset.n_val", "dataset.hw",        "dataset.seed",    "dataset.style_seed",
    "dataset.noise"};
const std::set<std::string> kGhnKeys = {
    "ghn.preset",         "ghn.layers",          "ghn.hidden",
    "ghn.heads",          "ghn.max_dist",        "ghn.max_degree",
    "ghn.use_sa",         "ghn.use_fw_edges",    "ghn.use_bw_edges",
    "ghn.use_centrality", "ghn.use_input_dist",  "ghn.decoder_channel_mult",
    "ghn.decoder_hidden_mult", "ghn.per_layer_edge_bias"};
const std::set<std::string> kTrainKeys = {
    "train.epochs",     "train.lr",        "train.weight_decay", "train.reg_coef",
    "train.reg_form",   "train.meta_batch", "train.data_batch",  "train.shards",
    "train.seed",       "train.save_every_epochs", "train.space_dir", "train.init_seed"};

std::set<std::string> merged(std::initializer_list<const std::set<std::string>*> sets,
                             std::initializer_list<std::string> extra = {}) {
  std::set<std::string> out;
  for (const auto* s : sets) out.insert(s->begin(), s->end());
  for (const auto& e : extra) out.insert(e);
  return out;
}

std::string dataset_dir(const TomlValue& root, const std::string& out_dir) {
  const TomlValue* s = root.find("dataset");
  std::string d = s ? s->get_str("dir", "") : "";
  return d.empty() ? (fs::path(out_dir) / "data").string() : d;
}

std::vector<ArchGraph> obtain_space(const TomlValue& root, const std::string& out_dir,
                                    const std::string& space_dir_key_section,
                                    std::optional<uint64_t> seed_override) {
  const TomlValue* sec = root.find(space_dir_key_section);
  std::string dir = sec ? sec->get_str("space_dir", "") : "";
  if (!dir.empty()) return load_space((fs::path(dir) / "space.json").string());
  ArchSpaceConfig cfg = parse_space(root);
  if (seed_override) cfg.rng_seed = *seed_override;
  auto archs = sample_space(cfg);
  write_space(archs, cfg, (fs::path(out_dir) / "space").string());
  return archs;
}

// ---- commands ----

int cmd_gen_space(const std::string& config_path, const std::string& out_dir,
                  std::optional<uint64_t> seed_override) {
  TomlValue root = toml_parse_file(config_path);
  toml_reject_unknown(root, kSpaceKeys);
  ArchSpaceConfig cfg = parse_space(root);
  if (seed_override) cfg.rng_seed = *seed_override;
  write_manifest(out_dir, "gen-space", config_path, cfg.rng_seed);
  auto archs = sample_space(cfg);
  std::string manifest = write_space(archs, cfg, out_dir);
  SpaceStats st = space_stats(archs);
  std::cout << "gen-space: " << archs.size() << " graphs -> " << manifest
            << " (mean params " << st.mean_params << ", mean degree " << st.mean_degree
            << ", mean path " << st.mean_path << ")\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume, std::optional<uint64_t> seed_override) {
  TomlValue root = toml_parse_file(config_path);
  toml_reject_unknown(root, merged({&kSpaceKeys, &kDatasetKeys, &kGhnKeys, &kTrainKeys}));
  TrainConfig tc = parse_train(root);
  if (seed_override) tc.seed = *seed_override;
  write_manifest(out_dir, "train", config_path, tc.seed);

  auto archs = obtain_space(root, out_dir, "train", std::nullopt);
  Dataset ds = ensure_dataset(parse_dataset(root), dataset_dir(root, out_dir));
  GhnConfig gc = parse_ghn(root);
  uint64_t init_seed = tc.seed;
  if (const TomlValue* t = root.find("train"))
    init_seed = static_cast<uint64_t>(t->get_int("init_seed", static_cast<int64_t>(init_seed)));
  GhnModel<float> model(gc, init_seed);
  TrainOutput out = train(model, archs, ds, tc, out_dir, resume);
  std::cout << "train: " << out.total_steps << " steps, checkpoint " << out.final_checkpoint
            << "\n";
  return 0;
}

int cmd_predict(const std::string& config_path, const std::string& out_dir,
                std::optional<uint64_t> seed_override) {
  TomlValue root = toml_parse_file(config_path);
  toml_reject_unknown(root, {"predict.model", "predict.graph", "predict.fallback_seed"});
  const TomlValue& p = root.require("predict", "config");
  std::string model_path = p.require("model", "predict").as_str("predict.model");
  std::string graph_path = p.require("graph", "predict").as_str("predict.graph");
  uint64_t fallback =
      static_cast<uint64_t>(p.get_int("fallback_seed", 0));
  if (seed_override) fallback = *seed_override;
  write_manifest(out_dir, "predict", config_path, fallback);

  GhnModel<float> model = load_ghn<float>(model_path);
  ArchGraph g = load_graph(graph_path);
  ParamSet<float> ps = predict_param_set(model, g, fallback);
  std::string ckpt = (fs::path(out_dir) / (g.name + ".params")).string();
  save_param_set(ps, ckpt);

  json slots;
  for (const auto& [id, src] : ps.source) slots[std::to_string(id)] = param_source_name(src);
  json sidecar{{"model_hash", hex64(hash_file(model_path))},
               {"graph_hash", hex64(hash_file(graph_path))},
               {"graph", g.name},
               {"params", fs::path(ckpt).filename().string()},
               {"slots", slots}};
  std::ofstream side(fs::path(out_dir) / (g.name + ".provenance.json"), std::ios::binary);
  side << sidecar.dump(2) << "\n";
  std::cout << "predict: " << ps.tensors.size() << " slots -> " << ckpt << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& out_dir,
             std::optional<uint64_t> seed_override) {
  TomlValue root = toml_parse_file(config_path);
  toml_reject_unknown(root, merged({&kSpaceKeys, &kDatasetKeys},
                                   {"eval.model", "eval.space_dir", "eval.val_batch", "eval.seed"}));
  const TomlValue& e = root.require("eval", "config");
  std::string model_path = e.require("model", "eval").as_str("eval.model");
  uint64_t seed = static_cast<uint64_t>(e.get_int("seed", 0));
  if (seed_override) seed = *seed_override;
  write_manifest(out_dir, "eval", config_path, seed);

  GhnModel<float> model = load_ghn<float>(model_path);
  auto archs = obtain_space(root, out_dir, "eval", seed ? std::optional<uint64_t>(seed) : std::nullopt);
  Dataset ds = ensure_dataset(parse_dataset(root), dataset_dir(root, out_dir));
  EvalReport rep =
      eval_no_finetune(model, archs, ds, static_cast<int>(e.get_int("val_batch", 256)));
  write_report_csv(rep, (fs::path(out_dir) / "eval.csv").string());
  write_report_json(rep, (fs::path(out_dir) / "eval.json").string());
  EvalAggregates agg = aggregate(rep);
  std::cout << "eval: mean " << agg.mean << " +- " << agg.stdev << " (top10 " << agg.top10_mean
            << ") over " << agg.n << " archs\n";
  return 0;
}

int cmd_finetune(const std::string& config_path, const std::string& out_dir,
                 std::optional<uint64_t> seed_override) {
  TomlValue root = toml_parse_file(config_path);
  toml_reject_unknown(
      root, merged({&kSpaceKeys, &kDatasetKeys},
                   {"finetune.model", "finetune.space_dir", "finetune.lrs", "finetune.steps",
                    "finetune.batch", "finetune.momentum", "finetune.weight_decay",
                    "finetune.val_batch", "finetune.noise_beta", "finetune.seed"}));
  const TomlValue& f = root.require("finetune", "config");
  CompareConfig cc;
  cc.sched = parse_sched(f, "finetune");
  cc.noise_beta = f.get_float("noise_beta", cc.noise_beta);
  cc.seed = static_cast<uint64_t>(f.get_int("seed", 0));
  if (seed_override) cc.seed = *seed_override;
  write_manifest(out_dir, "finetune", config_path, cc.seed);

  GhnModel<float> model = load_ghn<float>(f.require("model", "finetune").as_str("finetune.model"));
  auto archs = obtain_space(root, out_dir, "finetune", std::nullopt);
  Dataset ds = ensure_dataset(parse_dataset(root), dataset_dir(root, out_dir));
  EvalReport rep = compare_inits(model, archs, ds, cc);
  write_report_csv(rep, (fs::path(out_dir) / "finetune.csv").string());
  write_report_json(rep, (fs::path(out_dir) / "finetune.json").string());
  WinStats w = win_stats(rep);
  std::cout << "finetune: win-rate " << w.win_rate * 100 << "% avg gain " << w.avg_gain
            << " avg loss " << w.avg_loss << " over " << w.n_pairs << " archs\n";
  return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& out_dir, bool do_diversity,
                bool do_variance, bool do_tau, std::optional<uint64_t> seed_override) {
  if (static_cast<int>(do_diversity) + static_cast<int>(do_variance) + static_cast<int>(do_tau) !=
      1)
    throw ConfigError("analyze: pass exactly one of --diversity, --variance, --tau");
  TomlValue root = toml_parse_file(config_path);
  toml_reject_unknown(
      root, merged({&kSpaceKeys, &kDatasetKeys},
                   {"analyze.model", "analyze.model_b", "analyze.space_dir", "analyze.graph",
                    "analyze.shape", "analyze.matching", "analyze.report_a", "analyze.report_b",
                    "analyze.seed", "analyze.batch"}));
  const TomlValue& a = root.require("analyze", "config");
  uint64_t seed = static_cast<uint64_t>(a.get_int("seed", 0));
  if (seed_override) seed = *seed_override;
  write_manifest(out_dir, "analyze", config_path, seed);

  if (do_tau) {
    EvalReport ra = read_report_csv(a.require("report_a", "analyze").as_str("analyze.report_a"));
    EvalReport rb = read_report_csv(a.require("report_b", "analyze").as_str("analyze.report_b"));
    std::map<std::string, double> accs;
    for (const auto& r : ra.rows)
      if (!r.failed) accs[r.arch] = r.acc;
    std::vector<double> xs, ys;
    for (const auto& r : rb.rows) {
      auto it = accs.find(r.arch);
      if (it != accs.end() && !r.failed) {
        xs.push_back(it->second);
        ys.push_back(r.acc);
      }
    }
    double tau = kendall_tau(xs, ys);
    json j{{"kendall_tau", tau}, {"n", xs.size()}};
    std::ofstream out(fs::path(out_dir) / "tau.json", std::ios::binary);
    out << j.dump(2) << "\n";
    std::cout << "analyze: kendall tau " << tau << " over " << xs.size() << " archs\n";
    return 0;
  }

  GhnModel<float> model = load_ghn<float>(a.require("model", "analyze").as_str("analyze.model"));
  auto archs = obtain_space(root, out_dir, "analyze", std::nullopt);

  if (do_diversity) {
    Shape want;
    for (int64_t d : a.require("shape", "analyze").as_int_array("analyze.shape")) want.push_back(d);
    MatchMode mode =
        a.get_str("matching", "direct") == "hungarian" ? MatchMode::kHungarian : MatchMode::kDirect;
    std::vector<Tensor<float>> collected;
    for (const auto& g : archs) {
      ParamSet<float> p = predict_param_set(model, g, fnv1a64(g.name));
      for (const auto& [id, t] : p.tensors)
        if (t.shape == want) collected.push_back(t);
    }
    DiversityReport rep = diversity(collected, mode);
    json j{{"mean_abs_cosine_distance", rep.mean_distance},
           {"n_tensors", collected.size()},
           {"n_pairs", rep.n_pairs},
           {"n_skipped", rep.n_skipped},
           {"matching", mode == MatchMode::kHungarian ? "hungarian" : "direct"}};
    std::ofstream out(fs::path(out_dir) / "diversity.json", std::ios::binary);
    out << j.dump(2) << "\n";
    std::cout << "analyze: diversity " << rep.mean_distance << " over " << rep.n_pairs
              << " pairs\n";
    return 0;
  }

  // variance probe: random init vs this model's prediction (vs model_b's)
  Dataset ds = ensure_dataset(parse_dataset(root), dataset_dir(root, out_dir));
  const ArchGraph& g = archs.at(0);
  int64_t bsz = a.get_int("batch", 64);
  std::vector<int64_t> idx(static_cast<size_t>(std::min<int64_t>(bsz, ds.val_x.shape[0])));
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
  Batch batch = make_batch(ds.val_x, ds.val_y, idx);

  std::vector<std::pair<std::string, ParamSet<float>>> inits;
  Rng rng(derive_seed(seed, {0x11a7}));
  inits.emplace_back("random", random_init<float>(g, rng));
  inits.emplace_back("predicted", predict_param_set(model, g, fnv1a64(g.name)));
  if (const TomlValue* mb = a.find("model_b")) {
    GhnModel<float> model_b = load_ghn<float>(mb->as_str("analyze.model_b"));
    inits.emplace_back("predicted_b", predict_param_set(model_b, g, fnv1a64(g.name)));
  }
  VarianceSeries vs = variance_probe(g, inits, batch);
  write_variance_csv(vs, (fs::path(out_dir) / "variance.csv").string());
  std::cout << "analyze: variance series for " << g.name << " (" << vs.node_ids.size()
            << " layers) written\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               std::optional<uint64_t> seed_override) {
  TomlValue root = toml_parse_file(config_path);
  toml_reject_unknown(root, merged({&kSpaceKeys, &kDatasetKeys, &kGhnKeys, &kTrainKeys},
                                   {"ablate.cells", "ablate.gammas", "ablate.seeds",
                                    "ablate.heldout_n", "ablate.heldout_seed"}));
  const TomlValue& ab = root.require("ablate", "config");
  std::vector<uint64_t> seeds;
  for (int64_t s : ab.require("seeds", "ablate").as_int_array("ablate.seeds"))
    seeds.push_back(static_cast<uint64_t>(s));
  if (seed_override && !seeds.empty()) seeds[0] = *seed_override;
  write_manifest(out_dir, "ablate", config_path, seeds.empty() ? 0 : seeds[0]);

  std::vector<double> gammas{3e-5};
  if (const TomlValue* gs = ab.find("gammas")) gammas = gs->as_float_array("ablate.gammas");

  std::vector<AblationCell> cells;
  auto wanted = ab.require("cells", "ablate").as_str_array("ablate.cells");
  for (double gamma : gammas) {
    for (const auto& cell : standard_ablation_cells(gamma)) {
      bool take = false;
      for (const auto& w : wanted) take = take || w == cell.name;
      if (take) cells.push_back(cell);
    }
  }
  if (cells.empty()) throw ConfigError("ablate.cells selected no known cell");

  auto archs = obtain_space(root, out_dir, "ablate", std::nullopt);
  Dataset ds = ensure_dataset(parse_dataset(root), dataset_dir(root, out_dir));
  // held-out split from an independent generator seed
  ArchSpaceConfig hcfg = parse_space(root);
  hcfg.n_archs = static_cast<int>(ab.get_int("heldout_n", 10));
  hcfg.rng_seed = static_cast<uint64_t>(ab.get_int("heldout_seed", 999));
  hcfg.name_prefix = "heldout";
  auto heldout = sample_space(hcfg);

  auto rows = ablation_sweep(archs, heldout, ds, parse_ghn(root), parse_train(root), cells, seeds,
                             (fs::path(out_dir) / "cells").string());
  write_ablation_csv(rows, (fs::path(out_dir) / "ablation.csv").string());
  std::cout << "ablate: " << rows.size() << " cells written\n";
  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"ghnforge: graph-hypernetwork parameter prediction at desk scale"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume;
  int threads = 0;
  uint64_t seed_flag = 0;
  bool seed_set = false;
  app.add_option("--threads", threads, "worker thread cap (0 = hardware)");
  app.add_option_function<uint64_t>(
         "--seed", [&](uint64_t v) { seed_flag = v; seed_set = true; },
         "override the command's seed");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "TOML config")->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* gen = app.add_subcommand("gen-space", "sample an architecture space");
  add_common(gen);
  CLI::App* tr = app.add_subcommand("train", "train a GHN on a space");
  add_common(tr);
  tr->add_option("--resume", resume, "checkpoint stem to resume from");
  CLI::App* pr = app.add_subcommand("predict", "predict parameters for a graph");
  add_common(pr);
  CLI::App* ev = app.add_subcommand("eval", "no-fine-tune evaluation");
  add_common(ev);
  CLI::App* ft = app.add_subcommand("finetune", "predicted-vs-random fine-tuning comparison");
  add_common(ft);
  CLI::App* an = app.add_subcommand("analyze", "diversity / variance / rank-correlation");
  add_common(an);
  bool an_div = false, an_var = false, an_tau = false;
  an->add_flag("--diversity", an_div);
  an->add_flag("--variance", an_var);
  an->add_flag("--tau", an_tau);
  CLI::App* abl = app.add_subcommand("ablate", "train the ablation grid");
  add_common(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::optional<uint64_t> seed_override;
  if (auto es = env_seed()) seed_override = *es;
  if (seed_set) seed_override = seed_flag;
  if (threads > 0) set_worker_count(threads);

  try {
    if (gen->parsed()) return cmd_gen_space(config_path, out_dir, seed_override);
    if (tr->parsed()) return cmd_train(config_path, out_dir, resume, seed_override);
    if (pr->parsed()) return cmd_predict(config_path, out_dir, seed_override);
    if (ev->parsed()) return cmd_eval(config_path, out_dir, seed_override);
    if (ft->parsed()) return cmd_finetune(config_path, out_dir, seed_override);
    if (an->parsed()) return cmd_analyze(config_path, out_dir, an_div, an_var, an_tau, seed_override);
    if (abl->parsed()) return cmd_ablate(config_path, out_dir, seed_override);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const NonFiniteActivation& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DivergedError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const AllTied& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateTensor& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ghnforge
