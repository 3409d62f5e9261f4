#pragma once

#include <limits>

#include "ghnforge/autodiff/ops.hpp"
#include "ghnforge/core/parallel.hpp"

namespace ghnforge {
namespace ops {

namespace detail {

// col has K = I*kh*kw rows and OH*OW columns; zero-padded borders.
template <class S>
void im2col(const S* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t OH, int64_t OW, S* col) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        S* dst = col + ((c * kh + ki) * kw + kj) * (OH * OW);
        for (int64_t oh = 0; oh < OH; ++oh) {
          int64_t ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) {
            for (int64_t ow = 0; ow < OW; ++ow) dst[oh * OW + ow] = S(0);
            continue;
          }
          const S* src_row = x + (c * H + ih) * W;
          for (int64_t ow = 0; ow < OW; ++ow) {
            int64_t iw = ow * stride - pad + kj;
            dst[oh * OW + ow] = (iw < 0 || iw >= W) ? S(0) : src_row[iw];
          }
        }
      }
    }
  }
}

template <class S>
void col2im_add(const S* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t OH, int64_t OW, S* x) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const S* src = col + ((c * kh + ki) * kw + kj) * (OH * OW);
        for (int64_t oh = 0; oh < OH; ++oh) {
          int64_t ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) continue;
          S* dst_row = x + (c * H + ih) * W;
          for (int64_t ow = 0; ow < OW; ++ow) {
            int64_t iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < W) dst_row[iw] += src[oh * OW + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// x: [B,C,H,W], w: [O,C,kh,kw] -> [B,O,OH,OW]. Images are processed in
// parallel chunks; the weight gradient is reduced in chunk order so results
// do not depend on the worker count.
template <class S>
Id<S> conv2d(Tape<S>& t, Id<S> x, Id<S> w, int64_t stride, int64_t pad) {
  const auto& vx = t.val(x);
  const auto& vw = t.val(w);
  if (vx.rank() != 4 || vw.rank() != 4) throw ShapeMismatch("conv2d: rank must be 4");
  int64_t B = vx.shape[0], C = vx.shape[1], H = vx.shape[2], W = vx.shape[3];
  int64_t O = vw.shape[0], kh = vw.shape[2], kw = vw.shape[3];
  if (vw.shape[1] != C) throw ShapeMismatch("conv2d: channel mismatch");
  int64_t OH = (H + 2 * pad - kh) / stride + 1;
  int64_t OW = (W + 2 * pad - kw) / stride + 1;
  if (OH < 1 || OW < 1) throw ShapeMismatch("conv2d: output spatial dims collapse to zero");

  const int64_t K = C * kh * kw;
  Tensor<S> out(Shape{B, O, OH, OW});
  {
    const S* xp = vx.ptr();
    S* op = out.ptr();
    parallel_for(B, [&](int64_t b0, int64_t b1) {
      std::vector<S> col(static_cast<size_t>(K * OH * OW));
      for (int64_t b = b0; b < b1; ++b) {
        detail::im2col(xp + b * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW, col.data());
        EMap<S>(op + b * O * OH * OW, O, OH * OW).noalias() =
            as_mat(vw, O, K) * ECMap<S>(col.data(), K, OH * OW);
      }
    });
  }

  bool ng = t.needs_grad(x) || t.needs_grad(w);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [=](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      const auto& vx2 = tp.val(x);
      const auto& vw2 = tp.val(w);
      const S* gp = g.ptr();
      bool need_x = tp.needs_grad(x);
      bool need_w = tp.needs_grad(w);
      S* gxp = need_x ? tp.grad(x).ptr() : nullptr;

      int nchunks = chunk_count(B);
      std::vector<Tensor<S>> gw_parts;
      if (need_w) gw_parts.assign(static_cast<size_t>(nchunks), Tensor<S>(vw2.shape));
      parallel_for_chunked(B, [&](int chunk, int64_t b0, int64_t b1) {
        std::vector<S> col(static_cast<size_t>(K * OH * OW));
        std::vector<S> gcol(need_x ? static_cast<size_t>(K * OH * OW) : 0);
        for (int64_t b = b0; b < b1; ++b) {
          detail::im2col(vx2.ptr() + b * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW,
                         col.data());
          ECMap<S> gout(gp + b * O * OH * OW, O, OH * OW);
          if (need_w)
            as_mat(gw_parts[static_cast<size_t>(chunk)], O, K).noalias() +=
                gout * ECMap<S>(col.data(), K, OH * OW).transpose();
          if (need_x) {
            EMap<S>(gcol.data(), K, OH * OW).noalias() =
                as_mat(vw2, O, K).transpose() * gout;
            detail::col2im_add(gcol.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                               gxp + b * C * H * W);
          }
        }
      });
      if (need_w) {
        auto& gw = tp.grad(w);
        for (int c = 0; c < nchunks; ++c)
          for (int64_t i = 0; i < gw.numel(); ++i) gw[i] += gw_parts[static_cast<size_t>(c)][i];
      }
    });
  }
  return id;
}

// Per-channel batch statistics (biased variance), exported to callers that
// maintain running stats.
template <class S>
struct BnStats {
  std::vector<S> mean, var;
};

// Batch-stat normalization followed by a learned per-channel scale. Caches
// x-hat for the backward pass; gradients flow through the batch statistics.
// Works on [B,C,H,W] and [B,C]. When `running` points at (mean, var) vectors
// it normalizes with those instead (evaluation mode for fine-tuned nets).
template <class S>
Id<S> bn_scale(Tape<S>& t, Id<S> x, Id<S> scale, S eps = S(1e-5),
               const std::pair<const std::vector<S>*, const std::vector<S>*>* running = nullptr,
               BnStats<S>* stats_out = nullptr) {
  const auto& vx = t.val(x);
  int64_t B = vx.shape[0], C = vx.shape[1];
  int64_t sp = vx.rank() == 4 ? vx.shape[2] * vx.shape[3] : 1;
  int64_t N = B * sp;
  const auto& vs = t.val(scale);
  if (vs.numel() != C) throw ShapeMismatch("bn_scale: scale size != channels");

  std::vector<S> mean(static_cast<size_t>(C), S(0)), inv_std(static_cast<size_t>(C));
  bool use_batch = running == nullptr;
  if (use_batch) {
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c) {
        const S* p = vx.ptr() + (b * C + c) * sp;
        S acc = 0;
        for (int64_t i = 0; i < sp; ++i) acc += p[i];
        mean[static_cast<size_t>(c)] += acc;
      }
    for (int64_t c = 0; c < C; ++c) mean[static_cast<size_t>(c)] /= static_cast<S>(N);
    std::vector<S> var(static_cast<size_t>(C), S(0));
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c) {
        const S* p = vx.ptr() + (b * C + c) * sp;
        S m = mean[static_cast<size_t>(c)], acc = 0;
        for (int64_t i = 0; i < sp; ++i) {
          S d = p[i] - m;
          acc += d * d;
        }
        var[static_cast<size_t>(c)] += acc;
      }
    for (int64_t c = 0; c < C; ++c)
      inv_std[static_cast<size_t>(c)] =
          S(1) / std::sqrt(var[static_cast<size_t>(c)] / static_cast<S>(N) + eps);
    if (stats_out) {
      stats_out->mean = mean;
      stats_out->var.resize(static_cast<size_t>(C));
      for (int64_t c = 0; c < C; ++c)
        stats_out->var[static_cast<size_t>(c)] = var[static_cast<size_t>(c)] / static_cast<S>(N);
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[static_cast<size_t>(c)] = (*running->first)[static_cast<size_t>(c)];
      inv_std[static_cast<size_t>(c)] =
          S(1) / std::sqrt((*running->second)[static_cast<size_t>(c)] + eps);
    }
  }

  Tensor<S> xhat(vx.shape);
  Tensor<S> out(vx.shape);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const S* p = vx.ptr() + (b * C + c) * sp;
      S* xh = xhat.ptr() + (b * C + c) * sp;
      S* o = out.ptr() + (b * C + c) * sp;
      S m = mean[static_cast<size_t>(c)], is = inv_std[static_cast<size_t>(c)],
        sc = vs[c];
      for (int64_t i = 0; i < sp; ++i) {
        xh[i] = (p[i] - m) * is;
        o[i] = xh[i] * sc;
      }
    }

  bool ng = t.needs_grad(x) || t.needs_grad(scale);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    auto back = [id, x, scale, B, C, sp, N, use_batch, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      const auto& vs2 = tp.val(scale);
      if (tp.needs_grad(scale)) {
        auto& gs = tp.grad(scale);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t c = 0; c < C; ++c) {
            const S* gp = g.ptr() + (b * C + c) * sp;
            const S* xh = xhat.ptr() + (b * C + c) * sp;
            S acc = 0;
            for (int64_t i = 0; i < sp; ++i) acc += gp[i] * xh[i];
            gs[c] += acc;
          }
      }
      if (tp.needs_grad(x)) {
        auto& gx = tp.grad(x);
        if (use_batch) {
          std::vector<S> sum_gxh(static_cast<size_t>(C), S(0)),
              sum_g(static_cast<size_t>(C), S(0));
          for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c) {
              const S* gp = g.ptr() + (b * C + c) * sp;
              const S* xh = xhat.ptr() + (b * C + c) * sp;
              S a0 = 0, a1 = 0;
              for (int64_t i = 0; i < sp; ++i) {
                a0 += gp[i];
                a1 += gp[i] * xh[i];
              }
              sum_g[static_cast<size_t>(c)] += a0;
              sum_gxh[static_cast<size_t>(c)] += a1;
            }
          for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c) {
              const S* gp = g.ptr() + (b * C + c) * sp;
              const S* xh = xhat.ptr() + (b * C + c) * sp;
              S* gxp = gx.ptr() + (b * C + c) * sp;
              S sc = vs2[c], is = inv_std[static_cast<size_t>(c)];
              S mg = sum_g[static_cast<size_t>(c)] / static_cast<S>(N);
              S mgxh = sum_gxh[static_cast<size_t>(c)] / static_cast<S>(N);
              for (int64_t i = 0; i < sp; ++i)
                gxp[i] += sc * is * (gp[i] - mg - xh[i] * mgxh);
            }
        } else {
          for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c) {
              const S* gp = g.ptr() + (b * C + c) * sp;
              S* gxp = gx.ptr() + (b * C + c) * sp;
              S k = vs2[c] * inv_std[static_cast<size_t>(c)];
              for (int64_t i = 0; i < sp; ++i) gxp[i] += gp[i] * k;
            }
        }
      }
    };
    t.set_back(id, std::move(back));
  }
  return id;
}

// Adds a learned per-channel shift.
template <class S>
Id<S> bn_shift(Tape<S>& t, Id<S> x, Id<S> shift) {
  const auto& vx = t.val(x);
  int64_t B = vx.shape[0], C = vx.shape[1];
  int64_t sp = vx.rank() == 4 ? vx.shape[2] * vx.shape[3] : 1;
  const auto& vt = t.val(shift);
  if (vt.numel() != C) throw ShapeMismatch("bn_shift: shift size != channels");
  Tensor<S> out = vx;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      S* o = out.ptr() + (b * C + c) * sp;
      for (int64_t i = 0; i < sp; ++i) o[i] += vt[c];
    }
  bool ng = t.needs_grad(x) || t.needs_grad(shift);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x, shift, B, C, sp](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      if (tp.needs_grad(x)) {
        auto& gx = tp.grad(x);
        for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
      }
      if (tp.needs_grad(shift)) {
        auto& gt = tp.grad(shift);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t c = 0; c < C; ++c) {
            const S* gp = g.ptr() + (b * C + c) * sp;
            S acc = 0;
            for (int64_t i = 0; i < sp; ++i) acc += gp[i];
            gt[c] += acc;
          }
      }
    });
  }
  return id;
}

template <class S>
Id<S> maxpool(Tape<S>& t, Id<S> x, int64_t kernel, int64_t stride) {
  const auto& vx = t.val(x);
  int64_t B = vx.shape[0], C = vx.shape[1], H = vx.shape[2], W = vx.shape[3];
  int64_t OH = (H - kernel) / stride + 1;
  int64_t OW = (W - kernel) / stride + 1;
  if (OH < 1 || OW < 1) throw ShapeMismatch("maxpool: output collapses to zero");
  Tensor<S> out(Shape{B, C, OH, OW});
  std::vector<int32_t> arg(static_cast<size_t>(out.numel()));
  int64_t oi = 0;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const S* p = vx.ptr() + (b * C + c) * H * W;
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
          S best = -std::numeric_limits<S>::infinity();
          int32_t bi = 0;
          for (int64_t ki = 0; ki < kernel; ++ki)
            for (int64_t kj = 0; kj < kernel; ++kj) {
              int64_t ih = oh * stride + ki, iw = ow * stride + kj;
              S v = p[ih * W + iw];
              if (v > best) {
                best = v;
                bi = static_cast<int32_t>(ih * W + iw);
              }
            }
          out[oi] = best;
          arg[static_cast<size_t>(oi)] = bi;
        }
    }
  bool ng = t.needs_grad(x);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x, B, C, H, W, OH, OW, arg = std::move(arg)](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto& gx = tp.grad(x);
      int64_t oi = 0;
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
          S* gp = gx.ptr() + (b * C + c) * H * W;
          for (int64_t k = 0; k < OH * OW; ++k, ++oi) gp[arg[static_cast<size_t>(oi)]] += g[oi];
        }
    });
  }
  return id;
}

template <class S>
Id<S> avgpool(Tape<S>& t, Id<S> x, int64_t kernel, int64_t stride) {
  const auto& vx = t.val(x);
  int64_t B = vx.shape[0], C = vx.shape[1], H = vx.shape[2], W = vx.shape[3];
  int64_t OH = (H - kernel) / stride + 1;
  int64_t OW = (W - kernel) / stride + 1;
  if (OH < 1 || OW < 1) throw ShapeMismatch("avgpool: output collapses to zero");
  S inv = S(1) / static_cast<S>(kernel * kernel);
  Tensor<S> out(Shape{B, C, OH, OW});
  int64_t oi = 0;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const S* p = vx.ptr() + (b * C + c) * H * W;
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
          S acc = 0;
          for (int64_t ki = 0; ki < kernel; ++ki)
            for (int64_t kj = 0; kj < kernel; ++kj)
              acc += p[(oh * stride + ki) * W + (ow * stride + kj)];
          out[oi] = acc * inv;
        }
    }
  bool ng = t.needs_grad(x);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x, B, C, H, W, OH, OW, kernel, stride, inv](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto& gx = tp.grad(x);
      int64_t oi = 0;
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
          S* gp = gx.ptr() + (b * C + c) * H * W;
          for (int64_t oh = 0; oh < OH; ++oh)
            for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
              S gv = g[oi] * inv;
              for (int64_t ki = 0; ki < kernel; ++ki)
                for (int64_t kj = 0; kj < kernel; ++kj)
                  gp[(oh * stride + ki) * W + (ow * stride + kj)] += gv;
            }
        }
    });
  }
  return id;
}

template <class S>
Id<S> global_avg_pool(Tape<S>& t, Id<S> x) {
  const auto& vx = t.val(x);
  int64_t B = vx.shape[0], C = vx.shape[1], sp = vx.shape[2] * vx.shape[3];
  Tensor<S> out(Shape{B, C});
  S inv = S(1) / static_cast<S>(sp);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const S* p = vx.ptr() + (b * C + c) * sp;
      S acc = 0;
      for (int64_t i = 0; i < sp; ++i) acc += p[i];
      out.at(b, c) = acc * inv;
    }
  bool ng = t.needs_grad(x);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, x, B, C, sp, inv](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      auto& gx = tp.grad(x);
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
          S gv = g.at(b, c) * inv;
          S* gp = gx.ptr() + (b * C + c) * sp;
          for (int64_t i = 0; i < sp; ++i) gp[i] += gv;
        }
    });
  }
  return id;
}

// Concatenates along the channel axis; inputs must agree on every other dim.
template <class S>
Id<S> concat_channels(Tape<S>& t, const std::vector<Id<S>>& xs) {
  if (xs.size() < 2) throw ShapeMismatch("concat: needs >= 2 inputs");
  const auto& first = t.val(xs[0]);
  int rank = first.rank();
  int64_t B = first.shape[0];
  int64_t sp = rank == 4 ? first.shape[2] * first.shape[3] : 1;
  int64_t total_c = 0;
  std::vector<int64_t> cs;
  for (auto xid : xs) {
    const auto& v = t.val(xid);
    if (v.rank() != rank || v.shape[0] != B ||
        (rank == 4 && (v.shape[2] != first.shape[2] || v.shape[3] != first.shape[3])))
      throw ShapeMismatch("concat: incompatible input shapes");
    cs.push_back(v.shape[1]);
    total_c += v.shape[1];
  }
  Shape osh = rank == 4 ? Shape{B, total_c, first.shape[2], first.shape[3]} : Shape{B, total_c};
  Tensor<S> out(osh);
  for (int64_t b = 0; b < B; ++b) {
    int64_t coff = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const auto& v = t.val(xs[i]);
      std::copy_n(v.ptr() + b * cs[i] * sp, cs[i] * sp,
                  out.ptr() + (b * total_c + coff) * sp);
      coff += cs[i];
    }
  }
  bool ng = false;
  for (auto xid : xs) ng = ng || t.needs_grad(xid);
  Id<S> id = t.add_node(std::move(out), ng, nullptr);
  if (ng) {
    t.set_back(id, [id, xs, cs, B, sp, total_c](Tape<S>& tp) {
      const auto& g = tp.grad(id);
      for (int64_t b = 0; b < B; ++b) {
        int64_t coff = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
          if (tp.needs_grad(xs[i])) {
            auto& gx = tp.grad(xs[i]);
            const S* gp = g.ptr() + (b * total_c + coff) * sp;
            S* dst = gx.ptr() + b * cs[i] * sp;
            for (int64_t k = 0; k < cs[i] * sp; ++k) dst[k] += gp[k];
          }
          coff += cs[i];
        }
      }
    });
  }
  return id;
}

}  // namespace ops
}  // namespace ghnforge
