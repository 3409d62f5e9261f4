#include "ghnforge/evalkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ghnforge/core/errors.hpp"

namespace ghnforge {

namespace {

// merge-sort inversion count (strict inversions)
int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch, size_t lo,
                         size_t hi) {
  if (hi - lo < 2) return 0;
  size_t mid = lo + (hi - lo) / 2;
  int64_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<int64_t>(lo), scratch.begin() + static_cast<int64_t>(hi),
            v.begin() + static_cast<int64_t>(lo));
  return inv;
}

int64_t tie_pairs(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  int64_t total = 0, run = 1;
  for (size_t i = 1; i <= v.size(); ++i) {
    if (i < v.size() && v[i] == v[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeMismatch("kendall_tau: length mismatch");
  const int64_t n = static_cast<int64_t>(a.size());
  if (n < 2) throw ShapeMismatch("kendall_tau: need at least 2 elements");

  std::vector<size_t> order(a.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return b[i] < b[j];
  });

  const int64_t n0 = n * (n - 1) / 2;
  int64_t n1 = tie_pairs(a);
  int64_t n2 = tie_pairs(b);
  if (n0 == n1 || n0 == n2)
    throw AllTied("kendall_tau undefined: a list is entirely tied");

  // joint ties
  int64_t n3 = 0, run = 1;
  for (size_t i = 1; i <= order.size(); ++i) {
    if (i < order.size() && a[order[i]] == a[order[i - 1]] && b[order[i]] == b[order[i - 1]]) {
      ++run;
    } else {
      n3 += run * (run - 1) / 2;
      run = 1;
    }
  }

  std::vector<double> y(a.size());
  for (size_t i = 0; i < order.size(); ++i) y[i] = b[order[i]];
  std::vector<double> scratch(y.size());
  int64_t discordant = count_inversions(y, scratch, 0, y.size());

  double num = static_cast<double>(n0 - n1 - n2 + n3 - 2 * discordant);
  double den = std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
  return num / den;
}

std::vector<int> hungarian_assignment(const std::vector<double>& cost, int n) {
  if (static_cast<int>(cost.size()) != n * n)
    throw ShapeMismatch("hungarian: cost matrix size mismatch");
  const double kInf = std::numeric_limits<double>::infinity();
  // 1-indexed potentials formulation
  std::vector<double> u(static_cast<size_t>(n) + 1, 0), v(static_cast<size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<size_t>(n) + 1, 0), p(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = p[static_cast<size_t>(j0)], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<size_t>(i0)] -
                     v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

namespace {

double dot(const float* a, const float* b, int64_t n) {
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double norm(const float* a, int64_t n) { return std::sqrt(dot(a, a, n)); }

}  // namespace

double abs_cosine_distance(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ShapeMismatch("cosine distance: length mismatch");
  int64_t n = static_cast<int64_t>(a.size());
  double na = norm(a.data(), n), nb = norm(b.data(), n);
  if (na == 0 || nb == 0) throw DegenerateTensor("cosine distance of a zero tensor");
  double c = dot(a.data(), b.data(), n) / (na * nb);
  return 1.0 - std::min(1.0, std::abs(c));
}

DiversityReport diversity(const std::vector<Tensor<float>>& tensors, MatchMode mode) {
  if (tensors.size() < 2)
    throw ConfigError("diversity: need at least 2 tensors of the shape");
  for (size_t i = 1; i < tensors.size(); ++i)
    if (tensors[i].shape != tensors[0].shape)
      throw ShapeMismatch("diversity: tensors must share a shape");

  DiversityReport rep;
  rep.matching = mode;
  const int64_t out_ch = tensors[0].shape[0];
  const int64_t per_ch = tensors[0].numel() / out_ch;

  double total = 0;
  for (size_t i = 0; i < tensors.size(); ++i) {
    for (size_t j = i + 1; j < tensors.size(); ++j) {
      const auto& ta = tensors[i];
      Tensor<float> tb = tensors[j];
      try {
        if (mode == MatchMode::kHungarian && out_ch > 1) {
          // per-channel absolute cosine costs; zero-norm channels cost 1
          std::vector<double> cost(static_cast<size_t>(out_ch * out_ch), 1.0);
          for (int64_t ca = 0; ca < out_ch; ++ca) {
            const float* pa = ta.ptr() + ca * per_ch;
            double na = norm(pa, per_ch);
            if (na == 0) continue;
            for (int64_t cb = 0; cb < out_ch; ++cb) {
              const float* pb = tensors[j].ptr() + cb * per_ch;
              double nb = norm(pb, per_ch);
              if (nb == 0) continue;
              double c = std::abs(dot(pa, pb, per_ch)) / (na * nb);
              cost[static_cast<size_t>(ca * out_ch + cb)] = 1.0 - std::min(1.0, c);
            }
          }
          auto assign = hungarian_assignment(cost, static_cast<int>(out_ch));
          for (int64_t ca = 0; ca < out_ch; ++ca)
            std::copy_n(tensors[j].ptr() + assign[static_cast<size_t>(ca)] * per_ch, per_ch,
                        tb.ptr() + ca * per_ch);
        }
        total += abs_cosine_distance(ta.data, tb.data);
        ++rep.n_pairs;
      } catch (const DegenerateTensor&) {
        ++rep.n_skipped;
      }
    }
  }
  if (rep.n_pairs == 0) throw DegenerateTensor("diversity: every pair was degenerate");
  rep.mean_distance = total / static_cast<double>(rep.n_pairs);
  return rep;
}

}  // namespace ghnforge
