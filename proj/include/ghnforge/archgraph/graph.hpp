#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ghnforge/core/tensor.hpp"

namespace ghnforge {

// Node vocabulary of the computational-graph IR. Parametric kinds carry one
// predicted tensor each; batch norm appears as a scale node followed by a
// shift node so that one node maps to exactly one parameter slot.
enum class OpKind : uint8_t {
  kInput = 0,
  kConv2d,
  kLinear,
  kBatchNorm,
  kRelu,
  kSilu,
  kMaxPool,
  kAvgPool,
  kGlobalAvgPool,
  kAdd,
  kConcat,
  kClassifierHead,
};

inline constexpr int kOpKindCount = 12;

const char* op_name(OpKind k);
OpKind op_from_name(const std::string& name);  // throws ConfigError on unknown

inline bool is_parametric(OpKind k) {
  return k == OpKind::kConv2d || k == OpKind::kLinear || k == OpKind::kBatchNorm ||
         k == OpKind::kClassifierHead;
}

// Convolutional or linear in the sense of the activation-variance probe; the
// classifier head is a linear layer.
inline bool is_conv_or_linear(OpKind k) {
  return k == OpKind::kConv2d || k == OpKind::kLinear || k == OpKind::kClassifierHead;
}

enum class BnRole : uint8_t { kScale = 0, kShift = 1 };

// Static per-node attributes. Meaning depends on the op kind:
//   conv2d:          channels (out), kernel, stride, padding
//   linear:          channels (out features)
//   classifier_head: channels (class count)
//   batchnorm:       bn_role
//   maxpool/avgpool: kernel, stride
struct NodeAttrs {
  int channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  BnRole bn_role = BnRole::kScale;
};

// dims of the parameter slot: rank 1 (BN vectors), 2 (linear), or 4 (conv).
using ParamShape = Shape;

struct ArchNode {
  int id = 0;
  OpKind op = OpKind::kInput;
  std::optional<ParamShape> shape;  // present iff is_parametric(op)
  NodeAttrs attrs;
};

struct ArchGraph {
  std::string name;
  std::vector<ArchNode> nodes;                  // indexed by id after build
  std::vector<std::pair<int, int>> edges;       // directed (src, dst)

  int node_count() const { return static_cast<int>(nodes.size()); }
  std::vector<std::vector<int>> succ_lists() const;  // sorted by node id
  std::vector<std::vector<int>> pred_lists() const;  // sorted by node id
  int input_index() const;   // unique node with op == input
  int sink_index() const;    // unique classifier_head
  int64_t param_count() const;
};

// Builder input: op list with caller-chosen ids plus connectivity. build_graph
// validates and renumbers topologically (ties broken by position in `nodes`).
struct ArchSpec {
  std::string name;
  std::vector<ArchNode> nodes;  // ids are provisional labels
  std::vector<std::pair<int, int>> edges;
};

// Validates, infers per-node channel counts and parameter-slot shapes, and
// returns the canonically numbered graph.
// Throws: CycleError, ShapeMismatch, DanglingNode, ConfigError.
ArchGraph build_graph(const ArchSpec& spec);

// Structural validation on an already-numbered graph (used after parsing and
// by tests that construct permuted graphs directly). Does not require
// topological id order.
void validate_graph(const ArchGraph& g);

// Output channel count per node, inferred from the input node (3 channels)
// forward. Shared by build_graph validation and the runtime executor.
std::vector<int> infer_channels(const ArchGraph& g, int input_channels = 3);

// Parameter-slot shape rule for one node given its inferred input channels.
std::optional<ParamShape> slot_shape(OpKind op, const NodeAttrs& attrs, int in_channels);

// JSON schema: {name, nodes:[{id, op, shape?, attrs?}], edges:[[src,dst],...]}
std::string graph_to_json(const ArchGraph& g);
ArchGraph graph_from_json(const std::string& text);
void save_graph(const ArchGraph& g, const std::string& path);
ArchGraph load_graph(const std::string& path);

}  // namespace ghnforge
