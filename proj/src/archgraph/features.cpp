#include "ghnforge/archgraph/features.hpp"

#include <queue>

#include "ghnforge/core/errors.hpp"

namespace ghnforge {

GraphFeatures compute_features(const ArchGraph& g, int max_dist) {
  if (max_dist < 1) throw ConfigError("max_dist must be >= 1");
  const int n = g.node_count();
  GraphFeatures f;
  f.n = n;
  f.max_dist = max_dist;
  f.in_degree.assign(static_cast<size_t>(n), 0);
  f.out_degree.assign(static_cast<size_t>(n), 0);
  for (auto [s, d] : g.edges) {
    ++f.out_degree[static_cast<size_t>(s)];
    ++f.in_degree[static_cast<size_t>(d)];
  }

  auto succs = g.succ_lists();
  const int32_t unreach = f.unreachable();
  f.spd_fw.assign(static_cast<size_t>(n) * n, unreach);
  std::vector<int32_t> dist(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<int> q;
    q.push(s);
    dist[static_cast<size_t>(s)] = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : succs[static_cast<size_t>(u)]) {
        if (dist[static_cast<size_t>(v)] < 0) {
          dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + 1;
          q.push(v);
        }
      }
    }
    for (int t = 0; t < n; ++t) {
      int32_t d = dist[static_cast<size_t>(t)];
      f.spd_fw[static_cast<size_t>(s) * n + t] =
          d < 0 ? unreach : std::min<int32_t>(d, max_dist);
    }
  }

  f.spd_bw.assign(static_cast<size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      f.spd_bw[static_cast<size_t>(i) * n + j] = f.spd_fw[static_cast<size_t>(j) * n + i];

  const int src = g.input_index();
  f.input_dist.resize(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) f.input_dist[static_cast<size_t>(t)] = f.fw(src, t);
  return f;
}

}  // namespace ghnforge
