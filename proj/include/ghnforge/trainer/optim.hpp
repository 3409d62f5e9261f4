#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ghnforge/autodiff/tape.hpp"

namespace ghnforge {

// Decoupled-weight-decay adaptive-moment optimizer. Decay applies to the
// parameter directly (never through the moments), moments use bias
// correction. Moment buffers are parallel to the model's parameter vector.
template <class S>
struct AdamW {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<Tensor<S>> m, v;

  void init(const std::vector<Parameter<S>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.value.shape);
      v.emplace_back(p.value.shape);
    }
    t = 0;
  }

  void step(std::vector<Parameter<S>>& params, double lr, double weight_decay) {
    if (m.size() != params.size()) init(params);
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].value;
      const auto& g = params[i].grad;
      auto& mi = m[i];
      auto& vi = v[i];
      for (int64_t j = 0; j < p.numel(); ++j) {
        double gj = static_cast<double>(g[j]);
        double mj = beta1 * static_cast<double>(mi[j]) + (1.0 - beta1) * gj;
        double vj = beta2 * static_cast<double>(vi[j]) + (1.0 - beta2) * gj * gj;
        mi[j] = static_cast<S>(mj);
        vi[j] = static_cast<S>(vj);
        double update = (mj / bc1) / (std::sqrt(vj / bc2) + eps) + weight_decay * static_cast<double>(p[j]);
        p[j] = static_cast<S>(static_cast<double>(p[j]) - lr * update);
      }
    }
  }
};

// Cosine decay from `base` at step 0 to exactly 0 at the final step.
inline double cosine_lr(double base, int64_t step, int64_t total_steps) {
  if (total_steps <= 1) return step == 0 ? base : 0.0;
  int64_t s = std::min(step, total_steps - 1);
  return 0.5 * base *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(s) /
                         static_cast<double>(total_steps - 1)));
}

}  // namespace ghnforge
