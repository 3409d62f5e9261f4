#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace ghnforge {

// Central-difference gradient checking in double precision. rel_err uses a
// floor so coordinates whose true gradient is at finite-difference noise
// level do not produce spurious ratios.
inline double fd_rel_err(double analytic, double numeric, double floor = 1e-7) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Perturbs *coord by +/-eps around its current value, calling loss() each
// time, and returns the relative error against `analytic`.
inline double fd_check_coord(double* coord, double analytic,
                             const std::function<double()>& loss, double eps = 1e-4) {
  double saved = *coord;
  *coord = saved + eps;
  double lp = loss();
  *coord = saved - eps;
  double lm = loss();
  *coord = saved;
  double numeric = (lp - lm) / (2.0 * eps);
  return fd_rel_err(analytic, numeric);
}

struct FdReport {
  double max_rel_err = 0;
  int64_t checked = 0;
};

// Checks a list of (coordinate pointer, analytic gradient) pairs.
inline FdReport fd_check_many(const std::vector<std::pair<double*, double>>& coords,
                              const std::function<double()>& loss, double eps = 1e-4) {
  FdReport r;
  for (auto [ptr, g] : coords) {
    r.max_rel_err = std::max(r.max_rel_err, fd_check_coord(ptr, g, loss, eps));
    ++r.checked;
  }
  return r;
}

}  // namespace ghnforge
