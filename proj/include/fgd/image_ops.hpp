#pragma once

#include "fgd/tensor.hpp"

namespace fgd {

// ---------------------------------------------------------------------------
// Bilinear warping along a backward flow field. out(p) = src(p + flow(p)),
// sample coordinates clamped to the image border.
// ---------------------------------------------------------------------------

template <typename T>
void check_warp_shapes(const Tensor<T>& src, const Tensor<T>& flow) {
  if (flow.c != 2)
    throw shape_error("warp: flow must have 2 channels, got " +
                      std::to_string(flow.c));
  if (src.h != flow.h || src.w != flow.w || src.n != flow.n)
    throw shape_error("warp: spatial mismatch src (" + src.shape_str() +
                      ") vs flow (" + flow.shape_str() + ")");
}

template <typename T>
Tensor<T> warp_bilinear(const Tensor<T>& src, const Tensor<T>& flow) {
  check_warp_shapes(src, flow);
  Tensor<T> out(src.n, src.c, src.h, src.w);
  for (int b = 0; b < src.n; ++b)
    for (int y = 0; y < src.h; ++y)
      for (int x = 0; x < src.w; ++x) {
        T sx = x + flow.at(b, 0, y, x);
        T sy = y + flow.at(b, 1, y, x);
        sx = std::clamp(sx, T(0), T(src.w - 1));
        sy = std::clamp(sy, T(0), T(src.h - 1));
        const int x0 = std::min(static_cast<int>(std::floor(sx)), src.w - 1);
        const int y0 = std::min(static_cast<int>(std::floor(sy)), src.h - 1);
        const int x1 = std::min(x0 + 1, src.w - 1);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const T fx = sx - x0, fy = sy - y0;
        for (int ch = 0; ch < src.c; ++ch) {
          const T v00 = src.at(b, ch, y0, x0), v01 = src.at(b, ch, y0, x1);
          const T v10 = src.at(b, ch, y1, x0), v11 = src.at(b, ch, y1, x1);
          out.at(b, ch, y, x) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                fy * ((1 - fx) * v10 + fx * v11);
        }
      }
  return out;
}

/// Accumulates gradients of warp_bilinear into g_src and g_flow (either may
/// be null). Clamped coordinates contribute zero flow gradient.
template <typename T>
void warp_bilinear_backward(const Tensor<T>& src, const Tensor<T>& flow,
                            const Tensor<T>& g_out, Tensor<T>* g_src,
                            Tensor<T>* g_flow) {
  for (int b = 0; b < src.n; ++b)
    for (int y = 0; y < src.h; ++y)
      for (int x = 0; x < src.w; ++x) {
        T sx = x + flow.at(b, 0, y, x);
        T sy = y + flow.at(b, 1, y, x);
        const bool cx = sx <= 0 || sx >= src.w - 1;
        const bool cy = sy <= 0 || sy >= src.h - 1;
        sx = std::clamp(sx, T(0), T(src.w - 1));
        sy = std::clamp(sy, T(0), T(src.h - 1));
        const int x0 = std::min(static_cast<int>(std::floor(sx)), src.w - 1);
        const int y0 = std::min(static_cast<int>(std::floor(sy)), src.h - 1);
        const int x1 = std::min(x0 + 1, src.w - 1);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const T fx = sx - x0, fy = sy - y0;
        T gfx = 0, gfy = 0;
        for (int ch = 0; ch < src.c; ++ch) {
          const T g = g_out.at(b, ch, y, x);
          if (g == T(0)) continue;
          if (g_src) {
            g_src->at(b, ch, y0, x0) += g * (1 - fy) * (1 - fx);
            g_src->at(b, ch, y0, x1) += g * (1 - fy) * fx;
            g_src->at(b, ch, y1, x0) += g * fy * (1 - fx);
            g_src->at(b, ch, y1, x1) += g * fy * fx;
          }
          const T v00 = src.at(b, ch, y0, x0), v01 = src.at(b, ch, y0, x1);
          const T v10 = src.at(b, ch, y1, x0), v11 = src.at(b, ch, y1, x1);
          gfx += g * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
          gfy += g * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
        }
        if (g_flow) {
          if (!cx) g_flow->at(b, 0, y, x) += gfx;
          if (!cy) g_flow->at(b, 1, y, x) += gfy;
        }
      }
}

// ---------------------------------------------------------------------------
// 2x2 average pooling. Flow fields additionally need their displacement
// values halved to stay in pixel units of the coarser grid; that rescale is
// applied by the caller (see tape downsample2x).
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> avgpool2(const Tensor<T>& x) {
  if (x.h % 2 != 0 || x.w % 2 != 0)
    throw shape_error("downsample2x: odd spatial size (" + x.shape_str() + ")");
  Tensor<T> y(x.n, x.c, x.h / 2, x.w / 2);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch)
      for (int oy = 0; oy < y.h; ++oy) {
        const T* r0 = x.row(b, ch, 2 * oy);
        const T* r1 = x.row(b, ch, 2 * oy + 1);
        T* out = y.row(b, ch, oy);
        for (int ox = 0; ox < y.w; ++ox)
          out[ox] = (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]) / T(4);
      }
  return y;
}

template <typename T>
void avgpool2_backward(const Tensor<T>& g_out, Tensor<T>& g_in) {
  for (int b = 0; b < g_out.n; ++b)
    for (int ch = 0; ch < g_out.c; ++ch)
      for (int oy = 0; oy < g_out.h; ++oy)
        for (int ox = 0; ox < g_out.w; ++ox) {
          const T g = g_out.at(b, ch, oy, ox) / T(4);
          g_in.at(b, ch, 2 * oy, 2 * ox) += g;
          g_in.at(b, ch, 2 * oy, 2 * ox + 1) += g;
          g_in.at(b, ch, 2 * oy + 1, 2 * ox) += g;
          g_in.at(b, ch, 2 * oy + 1, 2 * ox + 1) += g;
        }
}

// ---------------------------------------------------------------------------
// Discrete Laplacian, stencil [[0,1,0],[1,-4,1],[0,1,0]] under replicate
// padding, applied per channel.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> laplacian(const Tensor<T>& x) {
  if (x.h < 2 || x.w < 2)
    throw shape_error("laplacian: needs H, W >= 2");
  Tensor<T> y(x.n, x.c, x.h, x.w);
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch)
      for (int yy = 0; yy < x.h; ++yy)
        for (int xx = 0; xx < x.w; ++xx)
          y.at(b, ch, yy, xx) = x.at(b, ch, clampi(yy - 1, x.h - 1), xx) +
                                x.at(b, ch, clampi(yy + 1, x.h - 1), xx) +
                                x.at(b, ch, yy, clampi(xx - 1, x.w - 1)) +
                                x.at(b, ch, yy, clampi(xx + 1, x.w - 1)) -
                                4 * x.at(b, ch, yy, xx);
  return y;
}

template <typename T>
void laplacian_backward(const Tensor<T>& g_out, Tensor<T>& g_in) {
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  for (int b = 0; b < g_out.n; ++b)
    for (int ch = 0; ch < g_out.c; ++ch)
      for (int yy = 0; yy < g_out.h; ++yy)
        for (int xx = 0; xx < g_out.w; ++xx) {
          const T g = g_out.at(b, ch, yy, xx);
          if (g == T(0)) continue;
          g_in.at(b, ch, clampi(yy - 1, g_out.h - 1), xx) += g;
          g_in.at(b, ch, clampi(yy + 1, g_out.h - 1), xx) += g;
          g_in.at(b, ch, yy, clampi(xx - 1, g_out.w - 1)) += g;
          g_in.at(b, ch, yy, clampi(xx + 1, g_out.w - 1)) += g;
          g_in.at(b, ch, yy, xx) -= 4 * g;
        }
}

// 3x3 box mean under replicate padding; the local statistics window for SSIM.
template <typename T>
Tensor<T> boxfilter3(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch)
      for (int yy = 0; yy < x.h; ++yy)
        for (int xx = 0; xx < x.w; ++xx) {
          T acc = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              acc += x.at(b, ch, clampi(yy + dy, x.h - 1),
                          clampi(xx + dx, x.w - 1));
          y.at(b, ch, yy, xx) = acc / T(9);
        }
  return y;
}

template <typename T>
void boxfilter3_backward(const Tensor<T>& g_out, Tensor<T>& g_in) {
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  for (int b = 0; b < g_out.n; ++b)
    for (int ch = 0; ch < g_out.c; ++ch)
      for (int yy = 0; yy < g_out.h; ++yy)
        for (int xx = 0; xx < g_out.w; ++xx) {
          const T g = g_out.at(b, ch, yy, xx) / T(9);
          if (g == T(0)) continue;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              g_in.at(b, ch, clampi(yy + dy, g_out.h - 1),
                      clampi(xx + dx, g_out.w - 1)) += g;
        }
}

/// Per-pixel confidence exp(-eps * mean_c |cur - warped_prev|), in (0, 1].
template <typename T>
Tensor<T> matching_confidence(const Tensor<T>& cur, const Tensor<T>& warped_prev,
                              T eps) {
  require_same_shape(cur, warped_prev, "matching_confidence");
  if (eps <= T(0)) throw numeric_error("matching_confidence: eps must be > 0");
  Tensor<T> m(cur.n, 1, cur.h, cur.w);
  for (int b = 0; b < cur.n; ++b)
    for (int y = 0; y < cur.h; ++y)
      for (int x = 0; x < cur.w; ++x) {
        T d = 0;
        for (int ch = 0; ch < cur.c; ++ch)
          d += std::abs(cur.at(b, ch, y, x) - warped_prev.at(b, ch, y, x));
        m.at(b, 0, y, x) = std::exp(-eps * d / cur.c);
      }
  return m;
}

}  // namespace fgd
