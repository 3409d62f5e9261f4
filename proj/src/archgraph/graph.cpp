#include "ghnforge/archgraph/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ghnforge/core/errors.hpp"

namespace ghnforge {

using json = nlohmann::json;

namespace {
const char* kOpNames[kOpKindCount] = {
    "input",    "conv2d",  "linear",          "batchnorm", "relu",   "silu",
    "maxpool",  "avgpool", "global_avg_pool", "add",       "concat", "classifier_head",
};
}

const char* op_name(OpKind k) { return kOpNames[static_cast<int>(k)]; }

OpKind op_from_name(const std::string& name) {
  for (int i = 0; i < kOpKindCount; ++i)
    if (name == kOpNames[i]) return static_cast<OpKind>(i);
  throw ConfigError("unknown op kind: '" + name + "'");
}

std::vector<std::vector<int>> ArchGraph::succ_lists() const {
  std::vector<std::vector<int>> out(nodes.size());
  for (auto [s, d] : edges) out[static_cast<size_t>(s)].push_back(d);
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

std::vector<std::vector<int>> ArchGraph::pred_lists() const {
  std::vector<std::vector<int>> out(nodes.size());
  for (auto [s, d] : edges) out[static_cast<size_t>(d)].push_back(s);
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

int ArchGraph::input_index() const {
  for (const auto& n : nodes)
    if (n.op == OpKind::kInput) return n.id;
  throw DanglingNode("graph has no input node");
}

int ArchGraph::sink_index() const {
  for (const auto& n : nodes)
    if (n.op == OpKind::kClassifierHead) return n.id;
  throw DanglingNode("graph has no classifier_head node");
}

int64_t ArchGraph::param_count() const {
  int64_t total = 0;
  for (const auto& n : nodes)
    if (n.shape) total += shape_numel(*n.shape);
  return total;
}

std::optional<ParamShape> slot_shape(OpKind op, const NodeAttrs& attrs, int in_channels) {
  switch (op) {
    case OpKind::kConv2d:
      return ParamShape{attrs.channels, in_channels, attrs.kernel, attrs.kernel};
    case OpKind::kLinear:
      return ParamShape{attrs.channels, in_channels};
    case OpKind::kClassifierHead:
      return ParamShape{attrs.channels, in_channels};
    case OpKind::kBatchNorm:
      return ParamShape{in_channels};
    default:
      return std::nullopt;
  }
}

std::vector<int> infer_channels(const ArchGraph& g, int input_channels) {
  auto preds = g.pred_lists();
  std::vector<int> ch(g.nodes.size(), -1);
  // process in a topological order derived from edges, ids may be arbitrary
  std::vector<int> indeg(g.nodes.size(), 0);
  for (auto [s, d] : g.edges) {
    (void)s;
    ++indeg[static_cast<size_t>(d)];
  }
  std::queue<int> q;
  for (const auto& n : g.nodes)
    if (indeg[static_cast<size_t>(n.id)] == 0) q.push(n.id);
  auto succs = g.succ_lists();
  std::vector<int> order;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    order.push_back(u);
    for (int v : succs[static_cast<size_t>(u)])
      if (--indeg[static_cast<size_t>(v)] == 0) q.push(v);
  }
  if (order.size() != g.nodes.size()) throw CycleError("graph is not a DAG: " + g.name);

  for (int id : order) {
    const ArchNode& n = g.nodes[static_cast<size_t>(id)];
    const auto& p = preds[static_cast<size_t>(id)];
    switch (n.op) {
      case OpKind::kInput:
        ch[static_cast<size_t>(id)] = input_channels;
        break;
      case OpKind::kConv2d:
      case OpKind::kLinear:
      case OpKind::kClassifierHead:
        ch[static_cast<size_t>(id)] = n.attrs.channels;
        break;
      case OpKind::kAdd: {
        int c = ch[static_cast<size_t>(p[0])];
        for (int pre : p)
          if (ch[static_cast<size_t>(pre)] != c)
            throw ShapeMismatch("add node " + std::to_string(id) + " joins channels " +
                                std::to_string(c) + " vs " +
                                std::to_string(ch[static_cast<size_t>(pre)]) + " in " + g.name);
        ch[static_cast<size_t>(id)] = c;
        break;
      }
      case OpKind::kConcat: {
        int c = 0;
        for (int pre : p) c += ch[static_cast<size_t>(pre)];
        ch[static_cast<size_t>(id)] = c;
        break;
      }
      default:
        ch[static_cast<size_t>(id)] = ch[static_cast<size_t>(p[0])];
        break;
    }
  }
  return ch;
}

namespace {

void check_arity(const ArchGraph& g) {
  auto preds = g.pred_lists();
  for (const auto& n : g.nodes) {
    size_t np = preds[static_cast<size_t>(n.id)].size();
    switch (n.op) {
      case OpKind::kInput:
        if (np != 0) throw ShapeMismatch("input node has predecessors in " + g.name);
        break;
      case OpKind::kAdd:
      case OpKind::kConcat:
        if (np < 2)
          throw ShapeMismatch(std::string(op_name(n.op)) + " node " + std::to_string(n.id) +
                              " needs >= 2 inputs in " + g.name);
        break;
      default:
        if (np != 1)
          throw ShapeMismatch(std::string(op_name(n.op)) + " node " + std::to_string(n.id) +
                              " needs exactly 1 input in " + g.name);
        break;
    }
    if (n.op == OpKind::kConv2d &&
        (n.attrs.kernel < 1 || n.attrs.stride < 1 || n.attrs.channels < 1))
      throw ConfigError("conv2d node " + std::to_string(n.id) + " has invalid attrs");
    if ((n.op == OpKind::kMaxPool || n.op == OpKind::kAvgPool) &&
        (n.attrs.kernel < 1 || n.attrs.stride < 1))
      throw ConfigError("pool node " + std::to_string(n.id) + " has invalid attrs");
    if ((n.op == OpKind::kLinear || n.op == OpKind::kClassifierHead) && n.attrs.channels < 1)
      throw ConfigError("linear node " + std::to_string(n.id) + " has invalid attrs");
  }
}

void check_reachability(const ArchGraph& g) {
  int src = -1, sink = -1, n_in = 0, n_head = 0;
  for (const auto& n : g.nodes) {
    if (n.op == OpKind::kInput) {
      ++n_in;
      src = n.id;
    }
    if (n.op == OpKind::kClassifierHead) {
      ++n_head;
      sink = n.id;
    }
  }
  if (n_in != 1) throw DanglingNode("graph must have exactly one input node: " + g.name);
  if (n_head != 1)
    throw DanglingNode("graph must have exactly one classifier_head node: " + g.name);

  auto bfs = [&](int start, const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(g.nodes.size(), 0);
    std::queue<int> q;
    q.push(start);
    seen[static_cast<size_t>(start)] = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : adj[static_cast<size_t>(u)])
        if (!seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          q.push(v);
        }
    }
    return seen;
  };
  auto fwd = bfs(src, g.succ_lists());
  auto bwd = bfs(sink, g.pred_lists());
  for (const auto& n : g.nodes) {
    if (!fwd[static_cast<size_t>(n.id)])
      throw DanglingNode("node " + std::to_string(n.id) + " unreachable from input in " + g.name);
    if (!bwd[static_cast<size_t>(n.id)])
      throw DanglingNode("node " + std::to_string(n.id) + " does not reach the sink in " + g.name);
  }
  auto succs = g.succ_lists();
  for (const auto& n : g.nodes)
    if (succs[static_cast<size_t>(n.id)].empty() && n.op != OpKind::kClassifierHead)
      throw DanglingNode("node " + std::to_string(n.id) + " is a non-head sink in " + g.name);
}

}  // namespace

void validate_graph(const ArchGraph& g) {
  if (g.nodes.empty()) throw DanglingNode("empty graph: " + g.name);
  std::set<int> ids;
  for (const auto& n : g.nodes) {
    if (n.id < 0 || n.id >= static_cast<int>(g.nodes.size()))
      throw ConfigError("node id out of range in " + g.name);
    if (!ids.insert(n.id).second) throw ConfigError("duplicate node id in " + g.name);
    if (is_parametric(n.op) != n.shape.has_value())
      throw ShapeMismatch("node " + std::to_string(n.id) +
                          ": parameter slot presence does not match op kind in " + g.name);
    if (n.shape) {
      size_t r = n.shape->size();
      if (r != 1 && r != 2 && r != 4)
        throw ShapeMismatch("node " + std::to_string(n.id) + ": slot rank must be 1, 2 or 4");
      for (int64_t d : *n.shape)
        if (d < 1) throw ShapeMismatch("node " + std::to_string(n.id) + ": slot dim < 1");
    }
  }
  for (auto [s, d] : g.edges) {
    if (s < 0 || d < 0 || s >= static_cast<int>(g.nodes.size()) ||
        d >= static_cast<int>(g.nodes.size()) || s == d)
      throw ConfigError("invalid edge (" + std::to_string(s) + "," + std::to_string(d) + ") in " +
                        g.name);
  }
  check_arity(g);
  check_reachability(g);
  infer_channels(g);  // throws CycleError / ShapeMismatch
}

ArchGraph build_graph(const ArchSpec& spec) {
  // provisional-id sanity
  std::map<int, size_t> pos;  // id -> insertion position (topo tie-break)
  for (size_t i = 0; i < spec.nodes.size(); ++i) {
    if (!pos.emplace(spec.nodes[i].id, i).second)
      throw ConfigError("duplicate node id " + std::to_string(spec.nodes[i].id) + " in spec " +
                        spec.name);
  }
  for (auto [s, d] : spec.edges)
    if (!pos.count(s) || !pos.count(d) || s == d)
      throw ConfigError("edge references unknown node in spec " + spec.name);

  // Kahn's algorithm; ready set ordered by insertion position.
  std::map<int, std::vector<int>> succs;
  std::map<int, int> indeg;
  for (const auto& n : spec.nodes) indeg[n.id] = 0;
  for (auto [s, d] : spec.edges) {
    succs[s].push_back(d);
    ++indeg[d];
  }
  std::set<std::pair<size_t, int>> ready;  // (insertion pos, id)
  for (const auto& n : spec.nodes)
    if (indeg[n.id] == 0) ready.insert({pos[n.id], n.id});

  std::vector<int> order;
  while (!ready.empty()) {
    auto [p, id] = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (int v : succs[id])
      if (--indeg[v] == 0) ready.insert({pos[v], v});
  }
  if (order.size() != spec.nodes.size()) throw CycleError("spec has a cycle: " + spec.name);

  std::map<int, int> renum;
  for (size_t i = 0; i < order.size(); ++i) renum[order[i]] = static_cast<int>(i);

  ArchGraph g;
  g.name = spec.name;
  g.nodes.resize(spec.nodes.size());
  for (const auto& n : spec.nodes) {
    ArchNode out = n;
    out.id = renum[n.id];
    out.shape.reset();  // shapes are derived below
    g.nodes[static_cast<size_t>(out.id)] = out;
  }
  for (auto [s, d] : spec.edges) g.edges.emplace_back(renum[s], renum[d]);
  std::sort(g.edges.begin(), g.edges.end());

  check_arity(g);
  check_reachability(g);
  auto ch = infer_channels(g);
  auto preds = g.pred_lists();
  for (auto& n : g.nodes) {
    int in_ch = preds[static_cast<size_t>(n.id)].empty()
                    ? 0
                    : ch[static_cast<size_t>(preds[static_cast<size_t>(n.id)][0])];
    n.shape = slot_shape(n.op, n.attrs, in_ch);
  }
  return g;
}

std::string graph_to_json(const ArchGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json jn{{"id", n.id}, {"op", op_name(n.op)}};
    if (n.shape) jn["shape"] = *n.shape;
    json attrs;
    switch (n.op) {
      case OpKind::kConv2d:
        attrs = {{"channels", n.attrs.channels},
                 {"kernel", n.attrs.kernel},
                 {"stride", n.attrs.stride},
                 {"padding", n.attrs.padding}};
        break;
      case OpKind::kLinear:
      case OpKind::kClassifierHead:
        attrs = {{"channels", n.attrs.channels}};
        break;
      case OpKind::kBatchNorm:
        attrs = {{"bn_role", n.attrs.bn_role == BnRole::kScale ? "scale" : "shift"}};
        break;
      case OpKind::kMaxPool:
      case OpKind::kAvgPool:
        attrs = {{"kernel", n.attrs.kernel}, {"stride", n.attrs.stride}};
        break;
      default:
        break;
    }
    if (!attrs.is_null()) jn["attrs"] = attrs;
    nodes.push_back(jn);
  }
  json edges = json::array();
  for (auto [s, d] : g.edges) edges.push_back(json::array({s, d}));
  json out{{"name", g.name}, {"nodes", nodes}, {"edges", edges}};
  return out.dump(2) + "\n";
}

ArchGraph graph_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("graph JSON parse error: ") + e.what());
  }
  ArchGraph g;
  g.name = j.at("name").get<std::string>();
  for (const auto& jn : j.at("nodes")) {
    ArchNode n;
    n.id = jn.at("id").get<int>();
    n.op = op_from_name(jn.at("op").get<std::string>());
    if (jn.contains("shape")) n.shape = jn.at("shape").get<ParamShape>();
    if (jn.contains("attrs")) {
      const auto& a = jn.at("attrs");
      if (a.contains("channels")) n.attrs.channels = a.at("channels").get<int>();
      if (a.contains("kernel")) n.attrs.kernel = a.at("kernel").get<int>();
      if (a.contains("stride")) n.attrs.stride = a.at("stride").get<int>();
      if (a.contains("padding")) n.attrs.padding = a.at("padding").get<int>();
      if (a.contains("bn_role"))
        n.attrs.bn_role =
            a.at("bn_role").get<std::string>() == "shift" ? BnRole::kShift : BnRole::kScale;
    }
    g.nodes.push_back(n);
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const ArchNode& a, const ArchNode& b) { return a.id < b.id; });
  for (const auto& je : j.at("edges")) g.edges.emplace_back(je.at(0).get<int>(), je.at(1).get<int>());
  std::sort(g.edges.begin(), g.edges.end());
  validate_graph(g);
  return g;
}

void save_graph(const ArchGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write graph: " + path);
  out << graph_to_json(g);
}

ArchGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read graph: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

}  // namespace ghnforge
