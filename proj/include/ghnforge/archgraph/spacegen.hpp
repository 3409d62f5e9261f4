#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ghnforge/archgraph/graph.hpp"

namespace ghnforge {

// Desk-scale random architecture space. Graphs are conv/BN/activation stacks
// over a 32x32 RGB input with residual and concat branches, ending in global
// average pooling and a classifier head.
struct ArchSpaceConfig {
  int n_archs = 100;
  int depth_min = 2;  // stages
  int depth_max = 6;
  int channels_min = 8;
  int channels_max = 32;
  double residual_p = 0.35;
  double concat_p = 0.15;
  std::vector<OpKind> activations = {OpKind::kRelu, OpKind::kSilu};
  double bn_p = 0.9;
  uint64_t rng_seed = 1;
  int classes = 10;
  int input_hw = 32;
  std::string name_prefix = "arch";

  void validate() const;  // throws ConfigError
};

struct ArchStats {
  int64_t params = 0;
  double mean_degree = 0;  // 2|E| / |V|
  double mean_path = 0;    // mean unclipped BFS distance from input over reachable nodes
};

struct SpaceStats {
  int n_archs = 0;
  double mean_params = 0, std_params = 0;
  double mean_degree = 0, std_degree = 0;
  double mean_path = 0, std_path = 0;
  std::vector<ArchStats> per_arch;
};

ArchStats arch_stats(const ArchGraph& g);
SpaceStats space_stats(const std::vector<ArchGraph>& archs);

// Samples cfg.n_archs distinct valid graphs, reproducible from rng_seed.
// Throws GenerationExhausted when the retry budget runs out.
std::vector<ArchGraph> sample_space(const ArchSpaceConfig& cfg);

// Writes one JSON file per graph plus a manifest with stats to `dir`.
// Returns the manifest path.
std::string write_space(const std::vector<ArchGraph>& archs, const ArchSpaceConfig& cfg,
                        const std::string& dir);

// Loads every graph listed in a space manifest.
std::vector<ArchGraph> load_space(const std::string& manifest_path);

}  // namespace ghnforge
