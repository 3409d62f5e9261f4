#pragma once

#include <cstdint>
#include <vector>

#include "ghnforge/archgraph/graph.hpp"

namespace ghnforge {

// Structural features consumed by the encoder. Shortest-path buckets are
// directed BFS distances clipped to max_dist; pairs with no directed path get
// the dedicated unreachable bucket (max_dist + 1). spd_bw is the transpose of
// spd_fw, stored explicitly.
struct GraphFeatures {
  int n = 0;
  int max_dist = 0;
  std::vector<int> in_degree;
  std::vector<int> out_degree;
  std::vector<int32_t> spd_fw;  // n*n, row-major
  std::vector<int32_t> spd_bw;  // n*n, spd_bw[i][j] == spd_fw[j][i]
  std::vector<int> input_dist;  // distance bucket from the input node

  int32_t unreachable() const { return max_dist + 1; }
  int32_t fw(int i, int j) const { return spd_fw[static_cast<size_t>(i) * n + j]; }
  int32_t bw(int i, int j) const { return spd_bw[static_cast<size_t>(i) * n + j]; }
};

GraphFeatures compute_features(const ArchGraph& g, int max_dist);

}  // namespace ghnforge
