#pragma once

#include <string>
#include <vector>

#include "ghnforge/core/tensor.hpp"

namespace ghnforge {

// Tie-corrected Kendall rank correlation (tau-b) via Knight's O(n log n)
// algorithm: sort by (x, y), count discordant pairs as merge-sort inversions
// of the y sequence, correct with per-variable tie counts. Throws AllTied
// when either list is entirely tied (undefined denominator).
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

// Exact min-cost assignment (Jonker-style shortest augmenting paths with
// potentials, O(n^3)). cost is row-major n x n; returns col index per row.
std::vector<int> hungarian_assignment(const std::vector<double>& cost, int n);

// 1 - |cosine similarity| of the flattened tensors. Throws DegenerateTensor
// if either has zero norm.
double abs_cosine_distance(const std::vector<float>& a, const std::vector<float>& b);

enum class MatchMode { kDirect, kHungarian };

struct DiversityReport {
  double mean_distance = 0;  // in [0, 1]
  int64_t n_pairs = 0;       // pairs measured
  int64_t n_skipped = 0;     // degenerate pairs skipped
  MatchMode matching = MatchMode::kDirect;
};

// Mean pairwise absolute cosine distance over all unordered pairs of
// same-shape tensors. Hungarian mode first permutes the second tensor's
// output channels (dim 0) to minimize per-channel distances, undoing
// arbitrary channel order before comparing.
DiversityReport diversity(const std::vector<Tensor<float>>& tensors, MatchMode mode);

}  // namespace ghnforge
