#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ghnforge/autodiff/tape.hpp"

namespace ghnforge {

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using EMap = Eigen::Map<EMat<S>>;
template <class S>
using ECMap = Eigen::Map<const EMat<S>>;

template <class S>
ECMap<S> as_mat(const Tensor<S>& t, int64_t rows, int64_t cols) {
  return ECMap<S>(t.ptr(), rows, cols);
}
template <class S>
EMap<S> as_mat(Tensor<S>& t, int64_t rows, int64_t cols) {
  return EMap<S>(t.ptr(), rows, cols);
}

namespace ops {

template <class S>
using Id = typename Tape<S>::Id;

// ---- elementwise ----

template <class S>
Id<S> add(Tape<S>& t, Id<S> a, Id<S> b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  if (va.shape != vb.shape) throw ShapeMismatch("add: shape mismatch");
  Tensor<S> out = va;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    auto back = [id, a, b](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      if (tp.needs_grad(a)) {
        auto& ga = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      if (tp.needs_grad(b)) {
        auto& gb = tp.grad(b);
        for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
      }
    };
    t.set_back(id, back);
  }
  return id;
}

template <class S>
Id<S> add_many(Tape<S>& t, const std::vector<Id<S>>& xs) {
  Id<S> acc = xs.at(0);
  for (size_t i = 1; i < xs.size(); ++i) acc = add(t, acc, xs[i]);
  return acc;
}

template <class S>
Id<S> scale(Tape<S>& t, Id<S> a, S c) {
  Tensor<S> out = t.val(a);
  for (auto& v : out.data) v *= c;
  bool ng = t.needs_grad(a);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, a, c](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
    });
  }
  return id;
}

template <class S>
Id<S> mul(Tape<S>& t, Id<S> a, Id<S> b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  if (va.shape != vb.shape) throw ShapeMismatch("mul: shape mismatch");
  Tensor<S> out = va;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, a, b](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      const auto& va2 = tp.val(a);
      const auto& vb2 = tp.val(b);
      if (tp.needs_grad(a)) {
        auto& ga = tp.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb2[i];
      }
      if (tp.needs_grad(b)) {
        auto& gb = tp.grad(b);
        for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va2[i];
      }
    });
  }
  return id;
}

template <class S>
Id<S> relu(Tape<S>& t, Id<S> a) {
  Tensor<S> out = t.val(a);
  for (auto& v : out.data) v = v > S(0) ? v : S(0);
  bool ng = t.needs_grad(a);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, a](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      const auto& x = tp.val(a);
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += x[i] > S(0) ? g[i] : S(0);
    });
  }
  return id;
}

template <class S>
Id<S> silu(Tape<S>& t, Id<S> a) {
  const auto& x = t.val(a);
  Tensor<S> out(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) {
    S s = S(1) / (S(1) + std::exp(-x[i]));
    out[i] = x[i] * s;
  }
  bool ng = t.needs_grad(a);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, a](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      const auto& x2 = tp.val(a);
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) {
        S s = S(1) / (S(1) + std::exp(-x2[i]));
        ga[i] += g[i] * (s * (S(1) + x2[i] * (S(1) - s)));
      }
    });
  }
  return id;
}

// ---- dense algebra ----

// X [n x din] * W^T [din x dout] + b
template <class S>
Id<S> linear(Tape<S>& t, Id<S> x, Id<S> w, Id<S> b = Tape<S>::kNone) {
  const auto& vx = t.val(x);
  const auto& vw = t.val(w);
  int64_t n = vx.shape[0], din = vx.shape[1];
  int64_t dout = vw.shape[0];
  if (vw.shape[1] != din) throw ShapeMismatch("linear: weight/input dim mismatch");
  Tensor<S> out(Shape{n, dout});
  as_mat(out, n, dout).noalias() = as_mat(vx, n, din) * as_mat(vw, dout, din).transpose();
  if (b != Tape<S>::kNone) {
    const auto& vb = t.val(b);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < dout; ++j) out.at(i, j) += vb[j];
  }
  bool ng = t.needs_grad(x) || t.needs_grad(w) || (b != Tape<S>::kNone && t.needs_grad(b));
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x, w, b, n, din, dout](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto gm = as_mat(g, n, dout);
      if (tp.needs_grad(x)) {
        auto& gx = tp.grad(x);
        as_mat(gx, n, din).noalias() += gm * as_mat(tp.val(w), dout, din);
      }
      if (tp.needs_grad(w)) {
        auto& gw = tp.grad(w);
        as_mat(gw, dout, din).noalias() += gm.transpose() * as_mat(tp.val(x), n, din);
      }
      if (b != Tape<S>::kNone && tp.needs_grad(b)) {
        auto& gb = tp.grad(b);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < dout; ++j) gb[j] += g.at(i, j);
      }
    });
  }
  return id;
}

// A [m x k] * B [k x n]
template <class S>
Id<S> matmul(Tape<S>& t, Id<S> a, Id<S> b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  int64_t m = va.shape[0], k = va.shape[1], n = vb.shape[1];
  if (vb.shape[0] != k) throw ShapeMismatch("matmul: inner dim mismatch");
  Tensor<S> out(Shape{m, n});
  as_mat(out, m, n).noalias() = as_mat(va, m, k) * as_mat(vb, k, n);
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, a, b, m, k, n](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto gm = as_mat(g, m, n);
      if (tp.needs_grad(a))
        as_mat(tp.grad(a), m, k).noalias() += gm * as_mat(tp.val(b), k, n).transpose();
      if (tp.needs_grad(b))
        as_mat(tp.grad(b), k, n).noalias() += as_mat(tp.val(a), m, k).transpose() * gm;
    });
  }
  return id;
}

// Row-wise layer norm with learned gain/bias.
template <class S>
Id<S> layernorm(Tape<S>& t, Id<S> x, Id<S> gain, Id<S> bias, S eps = S(1e-5)) {
  const auto& vx = t.val(x);
  int64_t n = vx.shape[0], d = vx.shape[1];
  const auto& vg = t.val(gain);
  const auto& vb = t.val(bias);
  Tensor<S> out(vx.shape);
  Tensor<S> xhat(vx.shape);
  std::vector<S> inv_std(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    S mean = 0;
    for (int64_t j = 0; j < d; ++j) mean += vx.at(i, j);
    mean /= static_cast<S>(d);
    S var = 0;
    for (int64_t j = 0; j < d; ++j) {
      S c = vx.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<S>(d);
    S is = S(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int64_t j = 0; j < d; ++j) {
      S xh = (vx.at(i, j) - mean) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * vg[j] + vb[j];
    }
  }
  bool ng = t.needs_grad(x) || t.needs_grad(gain) || t.needs_grad(bias);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    auto back = [id, x, gain, bias, n, d, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      const auto& vg2 = tp.val(gain);
      if (tp.needs_grad(gain)) {
        auto& gg = tp.grad(gain);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d; ++j) gg[j] += g.at(i, j) * xhat.at(i, j);
      }
      if (tp.needs_grad(bias)) {
        auto& gb = tp.grad(bias);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d; ++j) gb[j] += g.at(i, j);
      }
      if (tp.needs_grad(x)) {
        auto& gx = tp.grad(x);
        for (int64_t i = 0; i < n; ++i) {
          S sum_gy = 0, sum_gy_xh = 0;
          for (int64_t j = 0; j < d; ++j) {
            S gy = g.at(i, j) * vg2[j];
            sum_gy += gy;
            sum_gy_xh += gy * xhat.at(i, j);
          }
          S is = inv_std[static_cast<size_t>(i)];
          for (int64_t j = 0; j < d; ++j) {
            S gy = g.at(i, j) * vg2[j];
            gx.at(i, j) += is * (gy - (sum_gy + xhat.at(i, j) * sum_gy_xh) / static_cast<S>(d));
          }
        }
      }
    };
    t.set_back(id, std::move(back));
  }
  return id;
}

// out[r] = m[indices[r]] (row gather); backward scatter-adds.
template <class S>
Id<S> gather_rows(Tape<S>& t, Id<S> m, std::vector<int64_t> indices) {
  const auto& vm = t.val(m);
  int64_t d = vm.shape[1];
  int64_t n = static_cast<int64_t>(indices.size());
  Tensor<S> out(Shape{n, d});
  for (int64_t r = 0; r < n; ++r) {
    int64_t src = indices[static_cast<size_t>(r)];
    if (src < 0 || src >= vm.shape[0]) throw ShapeMismatch("gather_rows: index out of range");
    std::copy_n(vm.ptr() + src * d, d, out.ptr() + r * d);
  }
  bool ng = t.needs_grad(m);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, m, d, n, indices = std::move(indices)](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto& gm = tp.grad(m);
      for (int64_t r = 0; r < n; ++r) {
        int64_t src = indices[static_cast<size_t>(r)];
        for (int64_t j = 0; j < d; ++j) gm[src * d + j] += g[r * d + j];
      }
    });
  }
  return id;
}

// Mean cross-entropy over the batch, with a numerically stable log-softmax.
// Caches softmax probabilities for the backward pass.
template <class S>
Id<S> softmax_cross_entropy(Tape<S>& t, Id<S> logits, const std::vector<int>& labels) {
  const auto& z = t.val(logits);
  int64_t bsz = z.shape[0], classes = z.shape[1];
  if (static_cast<int64_t>(labels.size()) != bsz)
    throw ShapeMismatch("softmax_ce: label count mismatch");
  Tensor<S> probs(z.shape);
  S loss = 0;
  for (int64_t i = 0; i < bsz; ++i) {
    S mx = z.at(i, 0);
    for (int64_t j = 1; j < classes; ++j) mx = std::max(mx, z.at(i, j));
    S sum = 0;
    for (int64_t j = 0; j < classes; ++j) {
      S e = std::exp(z.at(i, j) - mx);
      probs.at(i, j) = e;
      sum += e;
    }
    for (int64_t j = 0; j < classes; ++j) probs.at(i, j) /= sum;
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= classes) throw ShapeMismatch("softmax_ce: label out of range");
    loss -= std::log(std::max(probs.at(i, y), S(1e-30)));
  }
  loss /= static_cast<S>(bsz);
  bool ng = t.needs_grad(logits);
  Id<S> id = t.add_node(Tensor<S>::scalar(loss), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, logits, bsz, classes, labels, probs = std::move(probs)](Tape<S>& tp) {
      S g = tp.grad(id)[0];
      auto& gz = tp.grad(logits);
      S inv_b = S(1) / static_cast<S>(bsz);
      for (int64_t i = 0; i < bsz; ++i) {
        for (int64_t j = 0; j < classes; ++j) {
          S p = probs.at(i, j);
          S y = (j == labels[static_cast<size_t>(i)]) ? S(1) : S(0);
          gz.at(i, j) += g * inv_b * (p - y);
        }
      }
    });
  }
  return id;
}

// Sum of all elements.
template <class S>
Id<S> sum_all(Tape<S>& t, Id<S> x) {
  const auto& vx = t.val(x);
  S s = 0;
  for (S v : vx.data) s += v;
  bool ng = t.needs_grad(x);
  Id<S> id = t.add_node(Tensor<S>::scalar(s), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x](Tape<S>& tp) {
      S g = tp.grad(id)[0];
      auto& gx = tp.grad(x);
      for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    });
  }
  return id;
}

// Sum of squared elements.
template <class S>
Id<S> sum_sq(Tape<S>& t, Id<S> x) {
  const auto& vx = t.val(x);
  S ss = 0;
  for (S v : vx.data) ss += v * v;
  bool ng = t.needs_grad(x);
  Id<S> id = t.add_node(Tensor<S>::scalar(ss), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x](Tape<S>& tp) {
      S g = tp.grad(id)[0];
      const auto& vx2 = tp.val(x);
      auto& gx = tp.grad(x);
      for (int64_t i = 0; i < vx2.numel(); ++i) gx[i] += S(2) * g * vx2[i];
    });
  }
  return id;
}

// Euclidean norm of all elements; subgradient 0 at the origin.
template <class S>
Id<S> l2_norm_scalar(Tape<S>& t, Id<S> x) {
  const auto& vx = t.val(x);
  S ss = 0;
  for (S v : vx.data) ss += v * v;
  S norm = std::sqrt(ss);
  bool ng = t.needs_grad(x);
  Id<S> id = t.add_node(Tensor<S>::scalar(norm), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x, norm](Tape<S>& tp) {
      if (norm <= S(0)) return;
      S g = tp.grad(id)[0];
      const auto& vx2 = tp.val(x);
      auto& gx = tp.grad(x);
      for (int64_t i = 0; i < vx2.numel(); ++i) gx[i] += g * vx2[i] / norm;
    });
  }
  return id;
}

}  // namespace ops
}  // namespace ghnforge
