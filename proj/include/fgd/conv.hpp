#pragma once

#include "fgd/tensor.hpp"

namespace fgd {

/// Convolution geometry. Weight layout is (out_ch, in_ch, k, k); padding is
/// derived so that stride-1 layers preserve resolution and stride-2 layers
/// halve it for even inputs.
struct ConvSpec {
  int kernel = 3;
  int stride = 1;
  int dilation = 1;
  int in_channels = 0;
  int out_channels = 0;
  int padding = 0;

  static ConvSpec same(int kernel, int stride, int dilation, int in_ch,
                       int out_ch) {
    ConvSpec s;
    s.kernel = kernel;
    s.stride = stride;
    s.dilation = dilation;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.padding = stride == 1 ? dilation * (kernel - 1) / 2 : (kernel - 1) / 2;
    return s;
  }

  void validate() const {
    if (kernel < 1 || kernel % 2 == 0)
      throw shape_error("conv kernel must be odd, got " + std::to_string(kernel));
    if (stride < 1 || dilation < 1)
      throw shape_error("conv stride and dilation must be >= 1");
  }

  int out_size(int in) const {
    return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  }
};

/// y[b,o,oh,ow] = sum_{i,kh,kw} x[b,i,oh*s-p+kh*d, ow*s-p+kw*d] * w[o,i,kh,kw]
template <typename T>
Tensor<T> conv_fwd(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s) {
  if (x.c != w.c)
    throw shape_error("conv: input channels " + std::to_string(x.c) +
                      " != weight in_channels " + std::to_string(w.c));
  const int oh_n = s.out_size(x.h), ow_n = s.out_size(x.w);
  if (oh_n < 1 || ow_n < 1)
    throw shape_error("conv: kernel does not fit padded input (" +
                      x.shape_str() + ")");
  Tensor<T> y(x.n, w.n, oh_n, ow_n);
  for (int b = 0; b < x.n; ++b)
    for (int o = 0; o < w.n; ++o)
      for (int oh = 0; oh < oh_n; ++oh) {
        T* yrow = y.row(b, o, oh);
        for (int kh = 0; kh < s.kernel; ++kh) {
          const int ih = oh * s.stride - s.padding + kh * s.dilation;
          if (ih < 0 || ih >= x.h) continue;
          for (int i = 0; i < x.c; ++i) {
            const T* xrow = x.row(b, i, ih);
            const T* wrow = w.row(o, i, kh);
            for (int kw = 0; kw < s.kernel; ++kw) {
              const T wv = wrow[kw];
              const int off = -s.padding + kw * s.dilation;
              int ow0 = 0, ow1 = ow_n;
              // restrict to iw in [0, x.w)
              while (ow0 < ow_n && ow0 * s.stride + off < 0) ++ow0;
              while (ow1 > ow0 && (ow1 - 1) * s.stride + off >= x.w) --ow1;
              const T* xp = xrow + ow0 * s.stride + off;
              for (int ow = ow0; ow < ow1; ++ow, xp += s.stride)
                yrow[ow] += wv * *xp;
            }
          }
        }
      }
  return y;
}

/// Adjoint of conv_fwd in its input: scatters g (shaped like the conv output)
/// back to an (hx, wx) input grid. Also the forward pass of the up-convolution.
template <typename T>
Tensor<T> conv_adjoint_input(const Tensor<T>& g, const Tensor<T>& w,
                             const ConvSpec& s, int hx, int wx) {
  if (g.c != w.n)
    throw shape_error("conv adjoint: channels " + std::to_string(g.c) +
                      " != weight out_channels " + std::to_string(w.n));
  Tensor<T> x(g.n, w.c, hx, wx);
  for (int b = 0; b < g.n; ++b)
    for (int o = 0; o < w.n; ++o)
      for (int oh = 0; oh < g.h; ++oh) {
        const T* grow = g.row(b, o, oh);
        for (int kh = 0; kh < s.kernel; ++kh) {
          const int ih = oh * s.stride - s.padding + kh * s.dilation;
          if (ih < 0 || ih >= hx) continue;
          for (int i = 0; i < w.c; ++i) {
            T* xrow = x.row(b, i, ih);
            const T* wrow = w.row(o, i, kh);
            for (int kw = 0; kw < s.kernel; ++kw) {
              const T wv = wrow[kw];
              const int off = -s.padding + kw * s.dilation;
              int ow0 = 0, ow1 = g.w;
              while (ow0 < g.w && ow0 * s.stride + off < 0) ++ow0;
              while (ow1 > ow0 && (ow1 - 1) * s.stride + off >= wx) --ow1;
              T* xp = xrow + ow0 * s.stride + off;
              for (int ow = ow0; ow < ow1; ++ow, xp += s.stride)
                *xp += wv * grow[ow];
            }
          }
        }
      }
  return x;
}

/// gw[o,i,kh,kw] = sum_{b,oh,ow} x[b,i,oh*s-p+kh*d, ...] * g[b,o,oh,ow]
template <typename T>
Tensor<T> conv_weight_grad(const Tensor<T>& x, const Tensor<T>& g,
                           const ConvSpec& s) {
  Tensor<T> gw(g.c, x.c, s.kernel, s.kernel);
  for (int b = 0; b < x.n; ++b)
    for (int o = 0; o < g.c; ++o)
      for (int oh = 0; oh < g.h; ++oh) {
        const T* grow = g.row(b, o, oh);
        for (int kh = 0; kh < s.kernel; ++kh) {
          const int ih = oh * s.stride - s.padding + kh * s.dilation;
          if (ih < 0 || ih >= x.h) continue;
          for (int i = 0; i < x.c; ++i) {
            const T* xrow = x.row(b, i, ih);
            T* gwrow = gw.row(o, i, kh);
            for (int kw = 0; kw < s.kernel; ++kw) {
              const int off = -s.padding + kw * s.dilation;
              int ow0 = 0, ow1 = g.w;
              while (ow0 < g.w && ow0 * s.stride + off < 0) ++ow0;
              while (ow1 > ow0 && (ow1 - 1) * s.stride + off >= x.w) --ow1;
              const T* xp = xrow + ow0 * s.stride + off;
              T acc = 0;
              for (int ow = ow0; ow < ow1; ++ow, xp += s.stride)
                acc += *xp * grow[ow];
              gwrow[kw] += acc;
            }
          }
        }
      }
  return gw;
}

}  // namespace fgd
