#include "ghnforge/archgraph/spacegen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ghnforge/core/errors.hpp"
#include "ghnforge/core/hash.hpp"
#include "ghnforge/core/rng.hpp"

namespace ghnforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

void ArchSpaceConfig::validate() const {
  if (n_archs < 1) throw ConfigError("space.n_archs must be >= 1");
  if (depth_min < 1 || depth_max < depth_min) throw ConfigError("space depth range is empty");
  if (channels_min < 1 || channels_max < channels_min)
    throw ConfigError("space channel range is empty");
  for (double p : {residual_p, concat_p, bn_p})
    if (p < 0.0 || p > 1.0) throw ConfigError("space probabilities must be in [0,1]");
  if (activations.empty()) throw ConfigError("space activation set is empty");
  for (OpKind a : activations)
    if (a != OpKind::kRelu && a != OpKind::kSilu)
      throw ConfigError("space activation set may contain only relu/silu");
  if (classes < 2) throw ConfigError("space.classes must be >= 2");
  if (input_hw < 4) throw ConfigError("space.input_hw must be >= 4");
}

namespace {

// Incremental spec builder; returns new node's provisional id.
struct SpecBuilder {
  ArchSpec spec;
  int next_id = 0;

  int node(OpKind op, NodeAttrs attrs = {}) {
    ArchNode n;
    n.id = next_id++;
    n.op = op;
    n.attrs = attrs;
    spec.nodes.push_back(n);
    return n.id;
  }
  void edge(int s, int d) { spec.edges.emplace_back(s, d); }
};

int round_channels(int c) { return std::max(4, (c / 4) * 4); }

struct GenState {
  SpecBuilder b;
  int cur = 0;       // current tail node
  int channels = 3;  // current channel count
  int spatial = 32;
};

void add_bn(GenState& st) {
  NodeAttrs scale;
  scale.bn_role = BnRole::kScale;
  int s = st.b.node(OpKind::kBatchNorm, scale);
  st.b.edge(st.cur, s);
  NodeAttrs shift;
  shift.bn_role = BnRole::kShift;
  int t = st.b.node(OpKind::kBatchNorm, shift);
  st.b.edge(s, t);
  st.cur = t;
}

void add_act(GenState& st, OpKind act) {
  int a = st.b.node(act);
  st.b.edge(st.cur, a);
  st.cur = a;
}

void add_conv(GenState& st, int out_ch, int kernel, int stride) {
  NodeAttrs a;
  a.channels = out_ch;
  a.kernel = kernel;
  a.stride = stride;
  a.padding = kernel / 2;
  int c = st.b.node(OpKind::kConv2d, a);
  st.b.edge(st.cur, c);
  st.cur = c;
  st.channels = out_ch;
  if (stride > 1) st.spatial = (st.spatial + stride - 1) / stride;
}

}  // namespace

ArchStats arch_stats(const ArchGraph& g) {
  ArchStats s;
  s.params = g.param_count();
  s.mean_degree = g.nodes.empty() ? 0.0
                                  : 2.0 * static_cast<double>(g.edges.size()) /
                                        static_cast<double>(g.nodes.size());
  // unclipped BFS from the input node
  auto succs = g.succ_lists();
  std::vector<int64_t> dist(g.nodes.size(), -1);
  std::queue<int> q;
  int src = g.input_index();
  dist[static_cast<size_t>(src)] = 0;
  q.push(src);
  int64_t total = 0, cnt = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    total += dist[static_cast<size_t>(u)];
    ++cnt;
    for (int v : succs[static_cast<size_t>(u)])
      if (dist[static_cast<size_t>(v)] < 0) {
        dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + 1;
        q.push(v);
      }
  }
  s.mean_path = cnt ? static_cast<double>(total) / static_cast<double>(cnt) : 0.0;
  return s;
}

SpaceStats space_stats(const std::vector<ArchGraph>& archs) {
  SpaceStats st;
  st.n_archs = static_cast<int>(archs.size());
  for (const auto& g : archs) st.per_arch.push_back(arch_stats(g));
  auto mean_std = [&](auto get, double& mean, double& stdev) {
    double sum = 0;
    for (const auto& a : st.per_arch) sum += get(a);
    mean = st.per_arch.empty() ? 0.0 : sum / static_cast<double>(st.per_arch.size());
    double ss = 0;
    for (const auto& a : st.per_arch) {
      double d = get(a) - mean;
      ss += d * d;
    }
    stdev = st.per_arch.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(st.per_arch.size()));
  };
  mean_std([](const ArchStats& a) { return static_cast<double>(a.params); }, st.mean_params,
           st.std_params);
  mean_std([](const ArchStats& a) { return a.mean_degree; }, st.mean_degree, st.std_degree);
  mean_std([](const ArchStats& a) { return a.mean_path; }, st.mean_path, st.std_path);
  return st;
}

std::vector<ArchGraph> sample_space(const ArchSpaceConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.rng_seed, {0x5ac3}));

  auto sample_channels = [&] {
    return round_channels(
        static_cast<int>(rng.uniform_int(cfg.channels_min, cfg.channels_max)));
  };
  auto sample_act = [&] {
    return cfg.activations[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(cfg.activations.size()) - 1))];
  };

  auto generate_one = [&](const std::string& name) -> ArchGraph {
    GenState st;
    st.b.spec.name = name;
    st.spatial = cfg.input_hw;
    st.cur = st.b.node(OpKind::kInput);
    st.channels = 3;

    int depth = static_cast<int>(rng.uniform_int(cfg.depth_min, cfg.depth_max));
    bool use_bn_net = rng.bernoulli(cfg.bn_p);
    OpKind act = sample_act();

    // stem
    add_conv(st, sample_channels(), rng.bernoulli(0.3) ? 5 : 3, 1);
    if (use_bn_net) add_bn(st);
    add_act(st, act);

    for (int stage = 0; stage < depth; ++stage) {
      if (st.spatial > 4 && rng.bernoulli(0.45)) {
        if (rng.bernoulli(0.3)) {
          add_conv(st, st.channels, 3, 2);  // strided conv downsample
          if (use_bn_net) add_bn(st);
          add_act(st, act);
        } else {
          NodeAttrs pa;
          pa.kernel = 2;
          pa.stride = 2;
          int p = st.b.node(rng.bernoulli(0.5) ? OpKind::kMaxPool : OpKind::kAvgPool, pa);
          st.b.edge(st.cur, p);
          st.cur = p;
          st.spatial /= 2;
        }
      }
      double r = rng.uniform();
      if (r < cfg.residual_p) {
        // residual block, channel-preserving
        int skip_from = st.cur;
        add_conv(st, st.channels, 3, 1);
        if (use_bn_net) add_bn(st);
        add_act(st, act);
        add_conv(st, st.channels, 3, 1);
        if (use_bn_net) add_bn(st);
        int a = st.b.node(OpKind::kAdd);
        st.b.edge(st.cur, a);
        st.b.edge(skip_from, a);
        st.cur = a;
        add_act(st, act);
      } else if (r < cfg.residual_p + cfg.concat_p) {
        // two parallel conv branches, concatenated
        int from = st.cur;
        int ch_a = std::max(4, sample_channels() / 2);
        int ch_b = std::max(4, sample_channels() / 2);
        add_conv(st, ch_a, 3, 1);
        if (use_bn_net) add_bn(st);
        add_act(st, act);
        int branch_a = st.cur;
        st.cur = from;
        add_conv(st, ch_b, 1, 1);
        if (use_bn_net) add_bn(st);
        add_act(st, act);
        int branch_b = st.cur;
        int cat = st.b.node(OpKind::kConcat);
        st.b.edge(branch_a, cat);
        st.b.edge(branch_b, cat);
        st.cur = cat;
        st.channels = ch_a + ch_b;
      } else {
        add_conv(st, sample_channels(), rng.bernoulli(0.2) ? 1 : 3, 1);
        if (use_bn_net) add_bn(st);
        add_act(st, act);
      }
    }

    int gap = st.b.node(OpKind::kGlobalAvgPool);
    st.b.edge(st.cur, gap);
    st.cur = gap;
    if (rng.bernoulli(0.3)) {
      NodeAttrs la;
      la.channels = round_channels(static_cast<int>(rng.uniform_int(16, 64)));
      int l = st.b.node(OpKind::kLinear, la);
      st.b.edge(st.cur, l);
      st.cur = l;
      add_act(st, act);
    }
    NodeAttrs ha;
    ha.channels = cfg.classes;
    int head = st.b.node(OpKind::kClassifierHead, ha);
    st.b.edge(st.cur, head);
    return build_graph(st.b.spec);
  };

  std::vector<ArchGraph> out;
  std::set<uint64_t> seen;
  int64_t attempts = 0;
  const int64_t max_attempts = 64 + 50LL * cfg.n_archs;
  while (static_cast<int>(out.size()) < cfg.n_archs) {
    if (++attempts > max_attempts)
      throw GenerationExhausted("could not sample " + std::to_string(cfg.n_archs) +
                                " distinct architectures in " + std::to_string(max_attempts) +
                                " attempts");
    std::string name =
        cfg.name_prefix + "_" + std::to_string(static_cast<int>(out.size()));
    ArchGraph g = generate_one(name);
    // distinctness over structure: hash the serialization with the name blanked
    ArchGraph anon = g;
    anon.name = "";
    uint64_t h = fnv1a64(graph_to_json(anon));
    if (!seen.insert(h).second) continue;
    out.push_back(std::move(g));
  }
  return out;
}

std::string write_space(const std::vector<ArchGraph>& archs, const ArchSpaceConfig& cfg,
                        const std::string& dir) {
  fs::create_directories(dir);
  json files = json::array();
  for (const auto& g : archs) {
    std::string fname = g.name + ".json";
    save_graph(g, (fs::path(dir) / fname).string());
    files.push_back(fname);
  }
  SpaceStats st = space_stats(archs);
  json stats{{"n_archs", st.n_archs},
             {"mean_params", st.mean_params},
             {"std_params", st.std_params},
             {"mean_degree", st.mean_degree},
             {"std_degree", st.std_degree},
             {"mean_path", st.mean_path},
             {"std_path", st.std_path}};
  json manifest{{"name", cfg.name_prefix},
                {"seed", cfg.rng_seed},
                {"classes", cfg.classes},
                {"input_hw", cfg.input_hw},
                {"archs", files},
                {"stats", stats}};
  std::string path = (fs::path(dir) / "space.json").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << manifest.dump(2) << "\n";
  return path;
}

std::vector<ArchGraph> load_space(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + manifest_path);
  json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw IoError(std::string("manifest parse error: ") + e.what());
  }
  fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<ArchGraph> out;
  for (const auto& f : manifest.at("archs"))
    out.push_back(load_graph((dir / f.get<std::string>()).string()));
  return out;
}

}  // namespace ghnforge
