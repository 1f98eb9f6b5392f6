#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/tensor.hpp"

namespace floorplan {

// Probability floor applied before log in the entropy loss.
inline constexpr double kLogClamp = 1e-12;

namespace detail {

// zero-pad a (c,h,w) block into (c, h+2ph, w+2pw)
template <typename S>
std::vector<S> pad2d(const S* x, int c, int h, int w, int ph, int pw) {
  const int hp = h + 2 * ph, wp = w + 2 * pw;
  std::vector<S> out(static_cast<std::size_t>(c) * hp * wp, S(0));
  for (int ic = 0; ic < c; ++ic)
    for (int y = 0; y < h; ++y) {
      const S* src = x + (static_cast<std::size_t>(ic) * h + y) * w;
      S* dst = out.data() + (static_cast<std::size_t>(ic) * hp + y + ph) * wp + pw;
      std::copy(src, src + w, dst);
    }
  return out;
}

// y[oc,oh,ow] += sum_{ic,kh,kw} w[oc,ic,kh,kw] * xp[ic, oh*s+kh, ow*s+kw]
// Per output element the partial sums arrive in (ic,kh,kw) order, which is the
// order the brute-force oracle uses; results are bit-comparable.
template <typename S>
void conv_accumulate(const S* xp, int cin, int hp, int wp, const S* w, int oc_n,
                     int kh_n, int kw_n, S* y, int oh_n, int ow_n, int stride) {
  for (int oc = 0; oc < oc_n; ++oc) {
    S* yo = y + static_cast<std::size_t>(oc) * oh_n * ow_n;
    for (int ic = 0; ic < cin; ++ic) {
      const S* x = xp + static_cast<std::size_t>(ic) * hp * wp;
      const S* wk = w + (static_cast<std::size_t>(oc) * cin + ic) * kh_n * kw_n;
      for (int kh = 0; kh < kh_n; ++kh)
        for (int kw = 0; kw < kw_n; ++kw) {
          const S wv = wk[kh * kw_n + kw];
          if (stride == 1) {
            for (int oh = 0; oh < oh_n; ++oh) {
              const S* xr = x + static_cast<std::size_t>(oh + kh) * wp + kw;
              S* yr = yo + static_cast<std::size_t>(oh) * ow_n;
              for (int ow = 0; ow < ow_n; ++ow)
                yr[ow] = mul_add(wv, xr[ow], yr[ow]);
            }
          } else {
            for (int oh = 0; oh < oh_n; ++oh) {
              const S* xr = x + static_cast<std::size_t>(oh * stride + kh) * wp + kw;
              S* yr = yo + static_cast<std::size_t>(oh) * ow_n;
              for (int ow = 0; ow < ow_n; ++ow)
                yr[ow] = mul_add(wv, xr[static_cast<std::size_t>(ow) * stride], yr[ow]);
            }
          }
        }
    }
  }
}

// dw[oc,ic,kh,kw] += sum_{oh,ow} g[oc,oh,ow] * xp[ic, oh*s+kh, ow*s+kw]
// Eight independent accumulators keep the reduction vectorizable; the lane
// combine order is fixed, so results are deterministic.
template <typename S>
void conv_weight_grad(const S* xp, int cin, int hp, int wp, const S* g,
                      int oc_n, int oh_n, int ow_n, S* dw, int kh_n, int kw_n,
                      int stride) {
  constexpr int kLanes = 8;
  for (int oc = 0; oc < oc_n; ++oc) {
    const S* go = g + static_cast<std::size_t>(oc) * oh_n * ow_n;
    for (int ic = 0; ic < cin; ++ic) {
      const S* x = xp + static_cast<std::size_t>(ic) * hp * wp;
      S* dwk = dw + (static_cast<std::size_t>(oc) * cin + ic) * kh_n * kw_n;
      for (int kh = 0; kh < kh_n; ++kh)
        for (int kw = 0; kw < kw_n; ++kw) {
          S acc[kLanes] = {};
          for (int oh = 0; oh < oh_n; ++oh) {
            const S* gr = go + static_cast<std::size_t>(oh) * ow_n;
            const S* xr = x + static_cast<std::size_t>(oh * stride + kh) * wp + kw;
            int ow = 0;
            if (stride == 1) {
              for (; ow + kLanes <= ow_n; ow += kLanes)
                for (int l = 0; l < kLanes; ++l)
                  acc[l] = mul_add(gr[ow + l], xr[ow + l], acc[l]);
              for (; ow < ow_n; ++ow) acc[0] = mul_add(gr[ow], xr[ow], acc[0]);
            } else {
              for (; ow < ow_n; ++ow)
                acc[0] = mul_add(gr[ow], xr[static_cast<std::size_t>(ow) * stride], acc[0]);
            }
          }
          S total = ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
                    ((acc[2] + acc[6]) + (acc[3] + acc[7]));
          dwk[kh * kw_n + kw] += total;
        }
    }
  }
}

}  // namespace detail

// Reverse-mode tape. Eager forward evaluation; each op registers a pull-back
// closure. One backward pass per tape; gradients accumulate additively across
// fan-out. A tape must stay on the thread that built it.
template <typename S>
class TapeT {
 public:
  using Id = std::int32_t;

  Id leaf(TensorT<S> t) { return push(std::move(t), nullptr); }

  const TensorT<S>& value(Id id) const { return node(id).value; }
  const std::vector<S>& grad(Id id) const { return node(id).grad; }

  TensorT<S> grad_tensor(Id id) const {
    const Node& n = node(id);
    TensorT<S> g(n.value.shape);
    g.data = n.grad;
    return g;
  }

  std::size_t size() const { return nodes_.size(); }

  // ---- primitives -------------------------------------------------------

  // cross-correlation with zero padding; weight (oc,ic,kh,kw), bias (1,oc,1,1)
  Id conv2d(Id x, Id w, Id b, int stride = 1, int pad = 0) {
    const TensorT<S>& xv = value(x);
    const TensorT<S>& wv = value(w);
    const TensorT<S>& bv = value(b);
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (pad < 0) throw ShapeError("conv2d: pad must be >= 0");
    if (wv.shape.c != xv.shape.c)
      throw ShapeError("conv2d: input channels " + xv.shape.str() +
                       " do not match kernel " + wv.shape.str());
    if (bv.shape != Shape4{1, wv.shape.b, 1, 1})
      throw ShapeError("conv2d: bias " + bv.shape.str() + " does not match kernel " +
                       wv.shape.str());
    const int oc = wv.shape.b, kh = wv.shape.h, kw = wv.shape.w;
    const int oh = (xv.shape.h + 2 * pad - kh) / stride + 1;
    const int ow = (xv.shape.w + 2 * pad - kw) / stride + 1;
    if (xv.shape.h + 2 * pad < kh || xv.shape.w + 2 * pad < kw || oh < 1 || ow < 1)
      throw ShapeError("conv2d: kernel " + wv.shape.str() + " too large for input " +
                       xv.shape.str() + " with pad " + std::to_string(pad));

    TensorT<S> y(Shape4{xv.shape.b, oc, oh, ow});
    for (int bi = 0; bi < xv.shape.b; ++bi) {
      const std::vector<S> xp = detail::pad2d(
          xv.data.data() + xv.index(bi, 0, 0, 0), xv.shape.c, xv.shape.h, xv.shape.w, pad, pad);
      S* yb = y.data.data() + y.index(bi, 0, 0, 0);
      for (int c = 0; c < oc; ++c)
        std::fill(yb + static_cast<std::size_t>(c) * oh * ow,
                  yb + static_cast<std::size_t>(c + 1) * oh * ow, bv.data[c]);
      detail::conv_accumulate(xp.data(), xv.shape.c, xv.shape.h + 2 * pad,
                              xv.shape.w + 2 * pad, wv.data.data(), oc, kh, kw, yb, oh,
                              ow, stride);
    }

    return push(std::move(y), [x, w, b, stride, pad](TapeT& t, Id out) {
      const TensorT<S>& xv = t.value(x);
      const TensorT<S>& wv = t.value(w);
      const std::vector<S>& g = t.node(out).grad;
      const Shape4 ys = t.value(out).shape;
      const int oc = wv.shape.b, cin = wv.shape.c, kh = wv.shape.h, kw = wv.shape.w;
      const int oh = ys.h, ow = ys.w;
      const int hp = xv.shape.h + 2 * pad, wp = xv.shape.w + 2 * pad;
      std::vector<S>& gx = t.node(x).grad;
      std::vector<S>& gw = t.node(w).grad;
      std::vector<S>& gb = t.node(b).grad;

      // transposed+flipped weights for the input gradient (stride 1 path)
      std::vector<S> wt;
      if (stride == 1) {
        wt.resize(wv.data.size());
        for (int o = 0; o < oc; ++o)
          for (int i = 0; i < cin; ++i)
            for (int y = 0; y < kh; ++y)
              for (int z = 0; z < kw; ++z)
                wt[((static_cast<std::size_t>(i) * oc + o) * kh + (kh - 1 - y)) * kw +
                   (kw - 1 - z)] =
                    wv.data[((static_cast<std::size_t>(o) * cin + i) * kh + y) * kw + z];
      }

      for (int bi = 0; bi < xv.shape.b; ++bi) {
        const S* gb_ptr = g.data() + (static_cast<std::size_t>(bi) * oc) * oh * ow;
        const std::vector<S> xp =
            detail::pad2d(xv.data.data() + xv.index(bi, 0, 0, 0), xv.shape.c,
                          xv.shape.h, xv.shape.w, pad, pad);
        // bias grad
        for (int c = 0; c < oc; ++c) {
          S acc(0);
          const S* gr = gb_ptr + static_cast<std::size_t>(c) * oh * ow;
          for (int i = 0; i < oh * ow; ++i) acc += gr[i];
          gb[c] += acc;
        }
        // weight grad
        detail::conv_weight_grad(xp.data(), cin, hp, wp, gb_ptr, oc, oh, ow,
                                 gw.data(), kh, kw, stride);
        // input grad
        std::vector<S> dxp(static_cast<std::size_t>(cin) * hp * wp, S(0));
        if (stride == 1) {
          const std::vector<S> gp = detail::pad2d(gb_ptr, oc, oh, ow, kh - 1, kw - 1);
          detail::conv_accumulate(gp.data(), oc, oh + 2 * (kh - 1), ow + 2 * (kw - 1),
                                  wt.data(), cin, kh, kw, dxp.data(), hp, wp, 1);
        } else {
          for (int o = 0; o < oc; ++o)
            for (int i = 0; i < cin; ++i)
              for (int y = 0; y < kh; ++y)
                for (int z = 0; z < kw; ++z) {
                  const S wv_s =
                      wv.data[((static_cast<std::size_t>(o) * cin + i) * kh + y) * kw + z];
                  for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q)
                      dxp[(static_cast<std::size_t>(i) * hp + r * stride + y) * wp +
                          q * stride + z] +=
                          wv_s * gb_ptr[(static_cast<std::size_t>(o) * oh + r) * ow + q];
                }
        }
        for (int i = 0; i < cin; ++i)
          for (int y = 0; y < xv.shape.h; ++y) {
            const S* src = dxp.data() + (static_cast<std::size_t>(i) * hp + y + pad) * wp + pad;
            S* dst = gx.data() + xv.index(bi, i, y, 0);
            for (int z = 0; z < xv.shape.w; ++z) dst[z] += src[z];
          }
      }
    });
  }

  // 2x2 max pooling, stride 2; gradient routes to the first max in scan order
  Id max_pool2d(Id x) {
    const TensorT<S>& xv = value(x);
    if (xv.shape.h % 2 != 0 || xv.shape.w % 2 != 0)
      throw ShapeError("max_pool2d: extents must be even, got " + xv.shape.str());
    TensorT<S> y(Shape4{xv.shape.b, xv.shape.c, xv.shape.h / 2, xv.shape.w / 2});
    std::vector<std::int32_t> argmax(static_cast<std::size_t>(y.numel()));
    std::size_t o = 0;
    for (int bi = 0; bi < xv.shape.b; ++bi)
      for (int c = 0; c < xv.shape.c; ++c)
        for (int yy = 0; yy < y.shape.h; ++yy)
          for (int xx = 0; xx < y.shape.w; ++xx, ++o) {
            std::size_t best = xv.index(bi, c, 2 * yy, 2 * xx);
            S bv = xv.data[best];
            const std::size_t idx[3] = {xv.index(bi, c, 2 * yy, 2 * xx + 1),
                                        xv.index(bi, c, 2 * yy + 1, 2 * xx),
                                        xv.index(bi, c, 2 * yy + 1, 2 * xx + 1)};
            for (std::size_t cand : idx)
              if (xv.data[cand] > bv) {
                bv = xv.data[cand];
                best = cand;
              }
            y.data[o] = bv;
            argmax[o] = static_cast<std::int32_t>(best);
          }
    return push(std::move(y), [x, argmax = std::move(argmax)](TapeT& t, Id out) {
      const std::vector<S>& g = t.node(out).grad;
      std::vector<S>& gx = t.node(x).grad;
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
    });
  }

  // each cell replicated into a 2x2 block
  Id upsample_nearest2(Id x) {
    const TensorT<S>& xv = value(x);
    TensorT<S> y(Shape4{xv.shape.b, xv.shape.c, xv.shape.h * 2, xv.shape.w * 2});
    for (int bi = 0; bi < xv.shape.b; ++bi)
      for (int c = 0; c < xv.shape.c; ++c)
        for (int yy = 0; yy < xv.shape.h; ++yy)
          for (int xx = 0; xx < xv.shape.w; ++xx) {
            const S v = xv.at(bi, c, yy, xx);
            y.at(bi, c, 2 * yy, 2 * xx) = v;
            y.at(bi, c, 2 * yy, 2 * xx + 1) = v;
            y.at(bi, c, 2 * yy + 1, 2 * xx) = v;
            y.at(bi, c, 2 * yy + 1, 2 * xx + 1) = v;
          }
    return push(std::move(y), [x](TapeT& t, Id out) {
      const TensorT<S>& yv = t.value(out);
      const std::vector<S>& g = t.node(out).grad;
      const TensorT<S>& xv = t.value(x);
      std::vector<S>& gx = t.node(x).grad;
      for (int bi = 0; bi < xv.shape.b; ++bi)
        for (int c = 0; c < xv.shape.c; ++c)
          for (int yy = 0; yy < xv.shape.h; ++yy)
            for (int xx = 0; xx < xv.shape.w; ++xx) {
              const std::size_t i00 = yv.index(bi, c, 2 * yy, 2 * xx);
              const std::size_t i01 = yv.index(bi, c, 2 * yy, 2 * xx + 1);
              const std::size_t i10 = yv.index(bi, c, 2 * yy + 1, 2 * xx);
              const std::size_t i11 = yv.index(bi, c, 2 * yy + 1, 2 * xx + 1);
              gx[xv.index(bi, c, yy, xx)] += ((g[i00] + g[i01]) + g[i10]) + g[i11];
            }
    });
  }

  Id add(Id a, Id b) { return elementwise(a, b, /*is_mul=*/false); }
  Id mul(Id a, Id b) { return elementwise(a, b, /*is_mul=*/true); }

  Id relu(Id x) {
    TensorT<S> y = value(x);
    for (S& v : y.data) v = v > S(0) ? v : S(0);
    return push(std::move(y), [x](TapeT& t, Id out) {
      const TensorT<S>& yv = t.value(out);
      const std::vector<S>& g = t.node(out).grad;
      std::vector<S>& gx = t.node(x).grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (yv.data[i] > S(0)) gx[i] += g[i];
    });
  }

  Id sigmoid(Id x) {
    TensorT<S> y = value(x);
    for (S& v : y.data) v = S(1) / (S(1) + std::exp(-v));
    return push(std::move(y), [x](TapeT& t, Id out) {
      const TensorT<S>& yv = t.value(out);
      const std::vector<S>& g = t.node(out).grad;
      std::vector<S>& gx = t.node(x).grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        gx[i] += g[i] * yv.data[i] * (S(1) - yv.data[i]);
    });
  }

  Id concat_channels(std::span<const Id> inputs) {
    if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape4 first = value(inputs[0]).shape;
    int total_c = 0;
    for (Id id : inputs) {
      const Shape4 s = value(id).shape;
      if (s.b != first.b || s.h != first.h || s.w != first.w)
        throw ShapeError("concat_channels: extents " + s.str() + " do not match " +
                         first.str());
      total_c += s.c;
    }
    TensorT<S> y(Shape4{first.b, total_c, first.h, first.w});
    const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
    for (int bi = 0; bi < first.b; ++bi) {
      std::size_t coff = 0;
      for (Id id : inputs) {
        const TensorT<S>& xv = value(id);
        std::copy(xv.data.begin() + static_cast<std::size_t>(bi) * xv.shape.c * plane,
                  xv.data.begin() + static_cast<std::size_t>(bi + 1) * xv.shape.c * plane,
                  y.data.begin() + (static_cast<std::size_t>(bi) * total_c + coff) * plane);
        coff += xv.shape.c;
      }
    }
    std::vector<Id> ins(inputs.begin(), inputs.end());
    return push(std::move(y), [ins = std::move(ins), plane](TapeT& t, Id out) {
      const TensorT<S>& yv = t.value(out);
      const std::vector<S>& g = t.node(out).grad;
      for (int bi = 0; bi < yv.shape.b; ++bi) {
        std::size_t coff = 0;
        for (Id id : ins) {
          const TensorT<S>& xv = t.value(id);
          std::vector<S>& gx = t.node(id).grad;
          const std::size_t n = static_cast<std::size_t>(xv.shape.c) * plane;
          const S* src = g.data() + (static_cast<std::size_t>(bi) * yv.shape.c + coff) * plane;
          S* dst = gx.data() + static_cast<std::size_t>(bi) * xv.shape.c * plane;
          for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
          coff += xv.shape.c;
        }
      }
    });
  }
  Id concat_channels(std::initializer_list<Id> inputs) {
    return concat_channels(std::span<const Id>(inputs.begin(), inputs.size()));
  }

  // softmax across the channel axis, per pixel
  Id softmax_channels(Id x) {
    const TensorT<S>& xv = value(x);
    TensorT<S> y(xv.shape);
    const int C = xv.shape.c;
    for (int bi = 0; bi < xv.shape.b; ++bi)
      for (int yy = 0; yy < xv.shape.h; ++yy)
        for (int xx = 0; xx < xv.shape.w; ++xx) {
          S m = xv.at(bi, 0, yy, xx);
          for (int c = 1; c < C; ++c) m = std::max(m, xv.at(bi, c, yy, xx));
          S sum(0);
          for (int c = 0; c < C; ++c) {
            const S e = std::exp(xv.at(bi, c, yy, xx) - m);
            y.at(bi, c, yy, xx) = e;
            sum += e;
          }
          for (int c = 0; c < C; ++c) y.at(bi, c, yy, xx) /= sum;
        }
    return push(std::move(y), [x](TapeT& t, Id out) {
      const TensorT<S>& yv = t.value(out);
      const std::vector<S>& g = t.node(out).grad;
      std::vector<S>& gx = t.node(x).grad;
      const int C = yv.shape.c;
      for (int bi = 0; bi < yv.shape.b; ++bi)
        for (int yy = 0; yy < yv.shape.h; ++yy)
          for (int xx = 0; xx < yv.shape.w; ++xx) {
            S dot(0);
            for (int c = 0; c < C; ++c) {
              const std::size_t i = yv.index(bi, c, yy, xx);
              dot += g[i] * yv.data[i];
            }
            for (int c = 0; c < C; ++c) {
              const std::size_t i = yv.index(bi, c, yy, xx);
              gx[i] += yv.data[i] * (g[i] - dot);
            }
          }
    });
  }

  // mean (or sum) over pixels of weights[label] * -log(max(p_label, 1e-12));
  // probs is a channel distribution per pixel, labels are row-major (b,h,w)
  Id weighted_nll(Id probs, std::vector<std::uint8_t> labels,
                  std::vector<S> class_weights, bool mean_over_pixels = true) {
    const TensorT<S>& pv = value(probs);
    const int C = pv.shape.c;
    const std::int64_t npx =
        static_cast<std::int64_t>(pv.shape.b) * pv.shape.h * pv.shape.w;
    if (static_cast<std::int64_t>(labels.size()) != npx)
      throw ShapeError("weighted_nll: " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(npx) + " pixels");
    if (static_cast<int>(class_weights.size()) != C)
      throw ShapeError("weighted_nll: " + std::to_string(class_weights.size()) +
                       " class weights for " + std::to_string(C) + " channels");
    for (std::uint8_t l : labels)
      if (l >= C)
        throw DataError("weighted_nll: label id " + std::to_string(int(l)) +
                        " out of range [0," + std::to_string(C) + ")");
    const S clamp = static_cast<S>(kLogClamp);
    double acc = 0.0;
    std::size_t li = 0;
    for (int bi = 0; bi < pv.shape.b; ++bi)
      for (int yy = 0; yy < pv.shape.h; ++yy)
        for (int xx = 0; xx < pv.shape.w; ++xx, ++li) {
          const S p = pv.at(bi, labels[li], yy, xx);
          acc += static_cast<double>(class_weights[labels[li]]) *
                 -std::log(static_cast<double>(std::max(p, clamp)));
        }
    if (mean_over_pixels) acc /= static_cast<double>(npx);
    TensorT<S> y = TensorT<S>::scalar(static_cast<S>(acc));
    const S coef = mean_over_pixels ? S(1) / static_cast<S>(npx) : S(1);
    return push(std::move(y), [probs, labels = std::move(labels),
                               class_weights = std::move(class_weights), coef,
                               clamp](TapeT& t, Id out) {
      const S go = t.node(out).grad[0];
      const TensorT<S>& pv = t.value(probs);
      std::vector<S>& gp = t.node(probs).grad;
      std::size_t li = 0;
      for (int bi = 0; bi < pv.shape.b; ++bi)
        for (int yy = 0; yy < pv.shape.h; ++yy)
          for (int xx = 0; xx < pv.shape.w; ++xx, ++li) {
            const std::size_t i = pv.index(bi, labels[li], yy, xx);
            if (pv.data[i] >= clamp)
              gp[i] += go * (-class_weights[labels[li]] * coef / pv.data[i]);
          }
    });
  }

  Id sum(Id x) {
    const TensorT<S>& xv = value(x);
    double acc = 0.0;
    for (S v : xv.data) acc += static_cast<double>(v);
    return push(TensorT<S>::scalar(static_cast<S>(acc)), [x](TapeT& t, Id out) {
      const S go = t.node(out).grad[0];
      std::vector<S>& gx = t.node(x).grad;
      for (S& g : gx) g += go;
    });
  }

  Id scale(Id x, S c) {
    TensorT<S> y = value(x);
    for (S& v : y.data) v *= c;
    return push(std::move(y), [x, c](TapeT& t, Id out) {
      const std::vector<S>& g = t.node(out).grad;
      std::vector<S>& gx = t.node(x).grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
    });
  }

  // ---- reverse pass ------------------------------------------------------

  void backward(Id loss) {
    if (backward_done_) throw Error("backward already run on this tape");
    const Shape4 ls = value(loss).shape;
    if (!(ls == Shape4{1, 1, 1, 1}))
      throw ShapeError("backward: loss must be a scalar, got " + ls.str());
    backward_done_ = true;
    node(loss).grad[0] = S(1);
    for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i)
      if (nodes_[i].pull) nodes_[i].pull(*this, i);
  }

 private:
  struct Node {
    TensorT<S> value;
    std::vector<S> grad;
    std::function<void(TapeT&, Id)> pull;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  Node& node(Id id) {
    if (id < 0 || id >= static_cast<Id>(nodes_.size()))
      throw ShapeError("tape: bad node id " + std::to_string(id));
    return nodes_[id];
  }
  const Node& node(Id id) const {
    return const_cast<TapeT*>(this)->node(id);
  }

  Id push(TensorT<S> v, std::function<void(TapeT&, Id)> pull) {
    Node n;
    n.grad.assign(v.data.size(), S(0));
    n.value = std::move(v);
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size()) - 1;
  }

  // pointwise with optional broadcast: b may be a single-channel map shared
  // across a's channels; the broadcast gradient sums over the channel axis
  Id elementwise(Id a, Id b, bool is_mul) {
    const TensorT<S>& av = value(a);
    const TensorT<S>& bv = value(b);
    const bool equal = av.shape == bv.shape;
    const bool bcast = !equal && bv.shape.c == 1 && av.shape.b == bv.shape.b &&
                       av.shape.h == bv.shape.h && av.shape.w == bv.shape.w;
    if (!equal && !bcast)
      throw ShapeError(std::string(is_mul ? "mul" : "add") + ": incompatible shapes " +
                       av.shape.str() + " and " + bv.shape.str());
    TensorT<S> y(av.shape);
    const std::size_t plane = static_cast<std::size_t>(av.shape.h) * av.shape.w;
    for (int bi = 0; bi < av.shape.b; ++bi)
      for (int c = 0; c < av.shape.c; ++c) {
        const S* pa = av.data.data() + av.index(bi, c, 0, 0);
        const S* pb = bv.data.data() + bv.index(bi, bcast ? 0 : c, 0, 0);
        S* py = y.data.data() + y.index(bi, c, 0, 0);
        if (is_mul)
          for (std::size_t i = 0; i < plane; ++i) py[i] = pa[i] * pb[i];
        else
          for (std::size_t i = 0; i < plane; ++i) py[i] = pa[i] + pb[i];
      }
    return push(std::move(y), [a, b, is_mul, bcast, plane](TapeT& t, Id out) {
      const std::vector<S>& g = t.node(out).grad;
      const TensorT<S>& av = t.value(a);
      const TensorT<S>& bv = t.value(b);
      std::vector<S>& ga = t.node(a).grad;
      std::vector<S>& gb = t.node(b).grad;
      for (int bi = 0; bi < av.shape.b; ++bi)
        for (int c = 0; c < av.shape.c; ++c) {
          const std::size_t oa = av.index(bi, c, 0, 0);
          const std::size_t ob = bv.index(bi, bcast ? 0 : c, 0, 0);
          if (is_mul)
            for (std::size_t i = 0; i < plane; ++i) {
              ga[oa + i] += g[oa + i] * bv.data[ob + i];
              gb[ob + i] += g[oa + i] * av.data[oa + i];
            }
          else
            for (std::size_t i = 0; i < plane; ++i) {
              ga[oa + i] += g[oa + i];
              gb[ob + i] += g[oa + i];
            }
        }
    });
  }
};

using Tape = TapeT<float>;

// Central finite-difference check of d f / d x. Returns the max over probed
// coordinates of |analytic - numeric| / max(1, |analytic|). Use double tensors;
// single precision is too coarse for reliable differences. sample_limit > 0
// probes a deterministic random subset of coordinates instead of all of them.
template <typename S, typename F>
double grad_check(F&& f, const TensorT<S>& x, double eps, int sample_limit = 0,
                  std::uint64_t sample_seed = 1234) {
  TapeT<S> tape;
  auto id = tape.leaf(x);
  auto loss = f(tape, id);
  tape.backward(loss);
  const std::vector<S> analytic = tape.grad(id);

  auto eval = [&](const TensorT<S>& probe) {
    TapeT<S> t2;
    auto i2 = t2.leaf(probe);
    auto l2 = f(t2, i2);
    return static_cast<double>(t2.value(l2).data[0]);
  };

  std::vector<std::size_t> coords;
  if (sample_limit > 0 && static_cast<std::size_t>(sample_limit) < x.data.size()) {
    Rng rng(sample_seed);
    for (int i = 0; i < sample_limit; ++i)
      coords.push_back(static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(x.data.size()) - 1)));
  } else {
    coords.resize(x.data.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
  }

  double max_rel = 0.0;
  TensorT<S> probe = x;
  for (std::size_t ci : coords) {
    const S saved = probe.data[ci];
    probe.data[ci] = saved + static_cast<S>(eps);
    const double lp = eval(probe);
    probe.data[ci] = saved - static_cast<S>(eps);
    const double lm = eval(probe);
    probe.data[ci] = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = static_cast<double>(analytic[ci]);
    const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace floorplan
