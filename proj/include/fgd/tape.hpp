#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fgd/conv.hpp"
#include "fgd/image_ops.hpp"
#include "fgd/tensor.hpp"

namespace fgd {

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
template <typename T>
struct Ref {
  Tape<T>* tape = nullptr;
  int idx = -1;

  bool valid() const { return tape != nullptr && idx >= 0; }
  const Tensor<T>& val() const { return tape->value(idx); }
};

/// Reverse-mode tape. Records one computation; backward() walks it once.
template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;  // empty until touched by backward
    std::function<void(Tape&, int)> back;
    bool needs_grad = false;
  };

  Ref<T> constant(Tensor<T> v) { return push(std::move(v), nullptr, false); }
  Ref<T> variable(Tensor<T> v) { return push(std::move(v), nullptr, true); }

  Ref<T> push(Tensor<T> v, std::function<void(Tape&, int)> back,
              bool needs_grad) {
    nodes_.push_back(Node{std::move(v), {}, std::move(back), needs_grad});
    return Ref<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(int i) const { return nodes_[i].val; }
  bool needs_grad(int i) const { return nodes_[i].needs_grad; }

  Tensor<T>& grad_buf(int i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0)
      n.grad = Tensor<T>(n.val.n, n.val.c, n.val.h, n.val.w);
    return n.grad;
  }
  bool has_grad(int i) const { return nodes_[i].grad.size() != 0; }

  /// Gradient of a node after backward(); zeros if it never received one.
  Tensor<T> gradient(Ref<T> r) {
    const Node& n = nodes_[r.idx];
    if (n.grad.size() == 0)
      return Tensor<T>(n.val.n, n.val.c, n.val.h, n.val.w);
    return n.grad;
  }

  void backward(Ref<T> loss) {
    if (loss.val().size() != 1)
      throw shape_error("backward: loss must be a scalar, got (" +
                        loss.val().shape_str() + ")");
    grad_buf(loss.idx).data[0] = T(1);
    for (int i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && n.needs_grad && n.grad.size() != 0) n.back(*this, i);
    }
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

template <typename T>
bool any_grad(std::initializer_list<Ref<T>> refs) {
  for (const Ref<T>& r : refs)
    if (r.valid() && r.tape->needs_grad(r.idx)) return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise unary ops
// ---------------------------------------------------------------------------

template <typename T, typename F, typename DF>
Ref<T> unary_op(Ref<T> x, const char* name, F fwd, DF dval) {
  const Tensor<T>& xv = x.val();
  Tensor<T> y(xv.n, xv.c, xv.h, xv.w);
  for (size_t i = 0; i < xv.size(); ++i) y.data[i] = fwd(xv.data[i]);
  ensure_finite(y, name);
  const int xi = x.idx;
  return x.tape->push(
      std::move(y),
      [xi, dval](Tape<T>& t, int self) {
        if (!t.needs_grad(xi)) return;
        const Tensor<T>& g = t.grad_buf(self);
        const Tensor<T>& xv = t.value(xi);
        const Tensor<T>& yv = t.value(self);
        Tensor<T>& gx = t.grad_buf(xi);
        for (size_t i = 0; i < g.size(); ++i)
          gx.data[i] += g.data[i] * dval(xv.data[i], yv.data[i]);
      },
      x.tape->needs_grad(x.idx));
}

template <typename T>
Ref<T> sigmoid(Ref<T> x) {
  return unary_op(x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                  [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Ref<T> tanh_(Ref<T> x) {
  return unary_op(x, "tanh", [](T v) { return std::tanh(v); },
                  [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Ref<T> relu(Ref<T> x) {
  return unary_op(x, "relu", [](T v) { return v > T(0) ? v : T(0); },
                  [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Ref<T> exp_(Ref<T> x) {
  return unary_op(x, "exp", [](T v) { return std::exp(v); },
                  [](T, T y) { return y; });
}

template <typename T>
Ref<T> log_(Ref<T> x) {
  for (T v : x.val().data)
    if (v <= T(0)) throw numeric_error("log of non-positive value");
  return unary_op(x, "log", [](T v) { return std::log(v); },
                  [](T v, T) { return T(1) / v; });
}

template <typename T>
Ref<T> abs_(Ref<T> x) {
  return unary_op(x, "abs", [](T v) { return std::abs(v); },
                  [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Ref<T> neg(Ref<T> x) {
  return unary_op(x, "neg", [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Ref<T> sqrt_(Ref<T> x) {
  for (T v : x.val().data)
    if (v < T(0)) throw numeric_error("sqrt of negative value");
  return unary_op(x, "sqrt", [](T v) { return std::sqrt(v); },
                  [](T, T y) { return T(1) / (T(2) * y); });
}

template <typename T>
Ref<T> mul_scalar(Ref<T> x, T k) {
  return unary_op(x, "mul_scalar", [k](T v) { return k * v; },
                  [k](T, T) { return k; });
}

template <typename T>
Ref<T> add_scalar(Ref<T> x, T k) {
  return unary_op(x, "add_scalar", [k](T v) { return v + k; },
                  [](T, T) { return T(1); });
}

// ---------------------------------------------------------------------------
// Elementwise binary ops with broadcasting: equal shapes, a 1-channel operand
// broadcast across channels, or a 1x1x1x1 scalar operand.
// ---------------------------------------------------------------------------

namespace detail {

enum class BKind { None, Chan, Scalar };

template <typename T>
BKind bcast_kind(const Tensor<T>& big, const Tensor<T>& small) {
  if (small.n == 1 && small.c == 1 && small.h == 1 && small.w == 1 &&
      big.size() != 1)
    return BKind::Scalar;
  if (small.c == 1 && big.c != 1 && small.n == big.n && small.h == big.h &&
      small.w == big.w)
    return BKind::Chan;
  return BKind::None;
}

template <typename T>
size_t bcast_index(const Tensor<T>& big, BKind k, size_t i) {
  if (k == BKind::Scalar) return 0;
  // channel broadcast: drop the channel coordinate
  const size_t hw = static_cast<size_t>(big.h) * big.w;
  const size_t b = i / (static_cast<size_t>(big.c) * hw);
  return b * hw + i % hw;
}

// accumulate src into dst under the same broadcast map
template <typename T>
void bcast_accumulate(const Tensor<T>& big, BKind k, const Tensor<T>& src,
                      Tensor<T>& dst) {
  if (k == BKind::None) {
    for (size_t i = 0; i < src.size(); ++i) dst.data[i] += src.data[i];
  } else {
    for (size_t i = 0; i < src.size(); ++i)
      dst.data[bcast_index(big, k, i)] += src.data[i];
  }
}

}  // namespace detail

template <typename T, typename F, typename DA, typename DB>
Ref<T> binary_op(Ref<T> a, Ref<T> b, const char* name, F fwd, DA da, DB db) {
  using detail::BKind;
  const Tensor<T>&av = a.val();
  const Tensor<T>&bv = b.val();
  BKind ka = BKind::None, kb = BKind::None;
  const Tensor<T>* big = &av;
  if (!av.same_shape(bv)) {
    if ((kb = detail::bcast_kind(av, bv)) != BKind::None) {
      big = &av;
    } else if ((ka = detail::bcast_kind(bv, av)) != BKind::None) {
      big = &bv;
    } else {
      throw shape_error(std::string(name) + ": incompatible shapes (" +
                        av.shape_str() + ") vs (" + bv.shape_str() + ")");
    }
  }
  Tensor<T> y(big->n, big->c, big->h, big->w);
  for (size_t i = 0; i < y.size(); ++i) {
    const T xa = av.data[ka == BKind::None ? i : detail::bcast_index(*big, ka, i)];
    const T xb = bv.data[kb == BKind::None ? i : detail::bcast_index(*big, kb, i)];
    y.data[i] = fwd(xa, xb);
  }
  ensure_finite(y, name);
  const int ai = a.idx, bi = b.idx;
  return a.tape->push(
      std::move(y),
      [ai, bi, ka, kb, da, db](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buf(self);
        const Tensor<T>& yv = t.value(self);
        const Tensor<T>& av = t.value(ai);
        const Tensor<T>& bv = t.value(bi);
        auto read = [&](const Tensor<T>& src, BKind k, size_t i) {
          return src.data[k == BKind::None ? i : detail::bcast_index(yv, k, i)];
        };
        if (t.needs_grad(ai)) {
          Tensor<T> ga(yv.n, yv.c, yv.h, yv.w);
          for (size_t i = 0; i < g.size(); ++i)
            ga.data[i] = g.data[i] * da(read(av, ka, i), read(bv, kb, i));
          detail::bcast_accumulate(yv, ka, ga, t.grad_buf(ai));
        }
        if (t.needs_grad(bi)) {
          Tensor<T> gb(yv.n, yv.c, yv.h, yv.w);
          for (size_t i = 0; i < g.size(); ++i)
            gb.data[i] = g.data[i] * db(read(av, ka, i), read(bv, kb, i));
          detail::bcast_accumulate(yv, kb, gb, t.grad_buf(bi));
        }
      },
      detail::any_grad<T>({a, b}));
}

template <typename T>
Ref<T> add(Ref<T> a, Ref<T> b) {
  return binary_op(a, b, "add", [](T x, T y) { return x + y; },
                   [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Ref<T> sub(Ref<T> a, Ref<T> b) {
  return binary_op(a, b, "sub", [](T x, T y) { return x - y; },
                   [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Ref<T> mul(Ref<T> a, Ref<T> b) {
  return binary_op(a, b, "mul", [](T x, T y) { return x * y; },
                   [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Ref<T> div(Ref<T> a, Ref<T> b) {
  return binary_op(a, b, "div", [](T x, T y) { return x / y; },
                   [](T, T y) { return T(1) / y; },
                   [](T x, T y) { return -x / (y * y); });
}

// ---------------------------------------------------------------------------
// Structure ops
// ---------------------------------------------------------------------------

template <typename T>
Ref<T> concat_channels(const std::vector<Ref<T>>& parts) {
  if (parts.empty()) throw shape_error("concat: no inputs");
  const Tensor<T>& first = parts[0].val();
  int ctot = 0;
  for (const Ref<T>& p : parts) {
    const Tensor<T>& v = p.val();
    if (v.n != first.n || v.h != first.h || v.w != first.w)
      throw shape_error("concat: spatial mismatch (" + v.shape_str() + ") vs (" +
                        first.shape_str() + ")");
    ctot += v.c;
  }
  Tensor<T> y(first.n, ctot, first.h, first.w);
  int coff = 0;
  for (const Ref<T>& p : parts) {
    const Tensor<T>& v = p.val();
    for (int b = 0; b < v.n; ++b)
      for (int ch = 0; ch < v.c; ++ch)
        std::copy(v.row(b, ch, 0), v.row(b, ch, 0) + size_t(v.h) * v.w,
                  y.row(b, coff + ch, 0));
    coff += v.c;
  }
  std::vector<int> idxs;
  bool ng = false;
  for (const Ref<T>& p : parts) {
    idxs.push_back(p.idx);
    ng = ng || p.tape->needs_grad(p.idx);
  }
  return parts[0].tape->push(
      std::move(y),
      [idxs](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buf(self);
        int coff = 0;
        for (int pi : idxs) {
          const Tensor<T>& v = t.value(pi);
          if (t.needs_grad(pi)) {
            Tensor<T>& gp = t.grad_buf(pi);
            for (int b = 0; b < v.n; ++b)
              for (int ch = 0; ch < v.c; ++ch) {
                const T* src = g.row(b, coff + ch, 0);
                T* dst = gp.row(b, ch, 0);
                for (size_t i = 0; i < size_t(v.h) * v.w; ++i) dst[i] += src[i];
              }
          }
          coff += v.c;
        }
      },
      ng);
}

template <typename T>
Ref<T> sum_all(Ref<T> x) {
  const Tensor<T>& xv = x.val();
  Tensor<T> y(1, 1, 1, 1);
  T acc = 0;
  for (T v : xv.data) acc += v;
  y.data[0] = acc;
  ensure_finite(y, "sum");
  const int xi = x.idx;
  return x.tape->push(
      std::move(y),
      [xi](Tape<T>& t, int self) {
        if (!t.needs_grad(xi)) return;
        const T g = t.grad_buf(self).data[0];
        Tensor<T>& gx = t.grad_buf(xi);
        for (T& v : gx.data) v += g;
      },
      x.tape->needs_grad(x.idx));
}

template <typename T>
Ref<T> mean_all(Ref<T> x) {
  return mul_scalar(sum_all(x), T(1) / T(x.val().size()));
}

template <typename T>
Ref<T> channel_mean(Ref<T> x) {
  const Tensor<T>& xv = x.val();
  Tensor<T> y(xv.n, 1, xv.h, xv.w);
  for (int b = 0; b < xv.n; ++b)
    for (int ch = 0; ch < xv.c; ++ch)
      for (int i = 0; i < xv.h * xv.w; ++i)
        y.row(b, 0, 0)[i] += xv.row(b, ch, 0)[i] / T(xv.c);
  const int xi = x.idx;
  return x.tape->push(
      std::move(y),
      [xi](Tape<T>& t, int self) {
        if (!t.needs_grad(xi)) return;
        const Tensor<T>& g = t.grad_buf(self);
        const Tensor<T>& xv = t.value(xi);
        Tensor<T>& gx = t.grad_buf(xi);
        for (int b = 0; b < xv.n; ++b)
          for (int ch = 0; ch < xv.c; ++ch)
            for (int i = 0; i < xv.h * xv.w; ++i)
              gx.row(b, ch, 0)[i] += g.row(b, 0, 0)[i] / T(xv.c);
      },
      x.tape->needs_grad(x.idx));
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

template <typename T>
Ref<T> conv2d(Ref<T> x, Ref<T> w, Ref<T> bias, const ConvSpec& spec) {
  spec.validate();
  const Tensor<T>& xv = x.val();
  const Tensor<T>& wv = w.val();
  if (xv.c != spec.in_channels || wv.c != spec.in_channels ||
      wv.n != spec.out_channels || wv.h != spec.kernel || wv.w != spec.kernel)
    throw shape_error("conv2d: spec/tensor mismatch, input (" + xv.shape_str() +
                      ") weight (" + wv.shape_str() + ")");
  Tensor<T> y = conv_fwd(xv, wv, spec);
  if (bias.valid()) {
    const Tensor<T>& bv = bias.val();
    if (bv.size() != static_cast<size_t>(spec.out_channels))
      throw shape_error("conv2d: bias size mismatch");
    for (int b = 0; b < y.n; ++b)
      for (int o = 0; o < y.c; ++o) {
        T* p = y.row(b, o, 0);
        for (int i = 0; i < y.h * y.w; ++i) p[i] += bv.data[o];
      }
  }
  ensure_finite(y, "conv2d");
  const int xi = x.idx, wi = w.idx, bi = bias.valid() ? bias.idx : -1;
  return x.tape->push(
      std::move(y),
      [xi, wi, bi, spec](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buf(self);
        const Tensor<T>& xv = t.value(xi);
        const Tensor<T>& wv = t.value(wi);
        if (t.needs_grad(xi)) {
          Tensor<T> gx = conv_adjoint_input(g, wv, spec, xv.h, xv.w);
          Tensor<T>& dst = t.grad_buf(xi);
          for (size_t i = 0; i < gx.size(); ++i) dst.data[i] += gx.data[i];
        }
        if (t.needs_grad(wi)) {
          Tensor<T> gw = conv_weight_grad(xv, g, spec);
          Tensor<T>& dst = t.grad_buf(wi);
          for (size_t i = 0; i < gw.size(); ++i) dst.data[i] += gw.data[i];
        }
        if (bi >= 0 && t.needs_grad(bi)) {
          Tensor<T>& gb = t.grad_buf(bi);
          for (int b = 0; b < g.n; ++b)
            for (int o = 0; o < g.c; ++o) {
              const T* p = g.row(b, o, 0);
              T acc = 0;
              for (int i = 0; i < g.h * g.w; ++i) acc += p[i];
              gb.data[o] += acc;
            }
        }
      },
      detail::any_grad<T>({x, w, bias}));
}

template <typename T>
Ref<T> conv2d(Ref<T> x, Ref<T> w, const ConvSpec& spec) {
  return conv2d(x, w, Ref<T>{}, spec);
}

/// Up-convolution, the adjoint of a strided conv. Weight layout is
/// (in_ch, out_ch, k, k); output spatial size is exactly stride * input size.
template <typename T>
Ref<T> conv2d_transpose(Ref<T> x, Ref<T> w, Ref<T> bias, const ConvSpec& spec) {
  const Tensor<T>& xv = x.val();
  const Tensor<T>& wv = w.val();
  if (xv.c != spec.in_channels || wv.n != spec.in_channels ||
      wv.c != spec.out_channels || wv.h != spec.kernel || wv.w != spec.kernel)
    throw shape_error("conv2d_transpose: spec/tensor mismatch, input (" +
                      xv.shape_str() + ") weight (" + wv.shape_str() + ")");
  ConvSpec v;  // the conv this op is the adjoint of
  v.kernel = spec.kernel;
  v.stride = spec.stride;
  v.dilation = spec.dilation;
  v.in_channels = spec.out_channels;
  v.out_channels = spec.in_channels;
  v.padding = (spec.kernel - 1) / 2;
  Tensor<T> y =
      conv_adjoint_input(xv, wv, v, spec.stride * xv.h, spec.stride * xv.w);
  if (bias.valid()) {
    const Tensor<T>& bv = bias.val();
    if (bv.size() != static_cast<size_t>(spec.out_channels))
      throw shape_error("conv2d_transpose: bias size mismatch");
    for (int b = 0; b < y.n; ++b)
      for (int o = 0; o < y.c; ++o) {
        T* p = y.row(b, o, 0);
        for (int i = 0; i < y.h * y.w; ++i) p[i] += bv.data[o];
      }
  }
  ensure_finite(y, "conv2d_transpose");
  const int xi = x.idx, wi = w.idx, bi = bias.valid() ? bias.idx : -1;
  return x.tape->push(
      std::move(y),
      [xi, wi, bi, v](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buf(self);
        const Tensor<T>& xv = t.value(xi);
        const Tensor<T>& wv = t.value(wi);
        if (t.needs_grad(xi)) {
          Tensor<T> gx = conv_fwd(g, wv, v);
          Tensor<T>& dst = t.grad_buf(xi);
          for (size_t i = 0; i < gx.size(); ++i) dst.data[i] += gx.data[i];
        }
        if (t.needs_grad(wi)) {
          Tensor<T> gw = conv_weight_grad(g, xv, v);
          Tensor<T>& dst = t.grad_buf(wi);
          for (size_t i = 0; i < gw.size(); ++i) dst.data[i] += gw.data[i];
        }
        if (bi >= 0 && t.needs_grad(bi)) {
          Tensor<T>& gb = t.grad_buf(bi);
          for (int b = 0; b < g.n; ++b)
            for (int o = 0; o < g.c; ++o) {
              const T* p = g.row(b, o, 0);
              T acc = 0;
              for (int i = 0; i < g.h * g.w; ++i) acc += p[i];
              gb.data[o] += acc;
            }
        }
      },
      detail::any_grad<T>({x, w, bias}));
}

template <typename T>
Ref<T> conv2d_transpose(Ref<T> x, Ref<T> w, const ConvSpec& spec) {
  return conv2d_transpose(x, w, Ref<T>{}, spec);
}

// ---------------------------------------------------------------------------
// Image ops on the tape
// ---------------------------------------------------------------------------

template <typename T>
Ref<T> bilinear_warp(Ref<T> src, Ref<T> flow) {
  Tensor<T> y = warp_bilinear(src.val(), flow.val());
  ensure_finite(y, "bilinear_warp");
  const int si = src.idx, fi = flow.idx;
  return src.tape->push(
      std::move(y),
      [si, fi](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buf(self);
        Tensor<T>* gs = t.needs_grad(si) ? &t.grad_buf(si) : nullptr;
        Tensor<T>* gf = t.needs_grad(fi) ? &t.grad_buf(fi) : nullptr;
        if (gs || gf)
          warp_bilinear_backward(t.value(si), t.value(fi), g, gs, gf);
      },
      detail::any_grad<T>({src, flow}));
}

template <typename T>
Ref<T> downsample2x(Ref<T> x, bool is_flow = false) {
  Tensor<T> y = avgpool2(x.val());
  const int xi = x.idx;
  Ref<T> pooled = x.tape->push(
      std::move(y),
      [xi](Tape<T>& t, int self) {
        if (!t.needs_grad(xi)) return;
        avgpool2_backward(t.grad_buf(self), t.grad_buf(xi));
      },
      x.tape->needs_grad(x.idx));
  return is_flow ? mul_scalar(pooled, T(0.5)) : pooled;
}

template <typename T>
Ref<T> laplacian(Ref<T> x) {
  Tensor<T> y = laplacian(x.val());
  const int xi = x.idx;
  return x.tape->push(
      std::move(y),
      [xi](Tape<T>& t, int self) {
        if (!t.needs_grad(xi)) return;
        laplacian_backward(t.grad_buf(self), t.grad_buf(xi));
      },
      x.tape->needs_grad(x.idx));
}

template <typename T>
Ref<T> boxfilter3(Ref<T> x) {
  Tensor<T> y = boxfilter3(x.val());
  const int xi = x.idx;
  return x.tape->push(
      std::move(y),
      [xi](Tape<T>& t, int self) {
        if (!t.needs_grad(xi)) return;
        boxfilter3_backward(t.grad_buf(self), t.grad_buf(xi));
      },
      x.tape->needs_grad(x.idx));
}

/// exp(-eps * mean_c |cur - warped_prev|), a 1-channel map in (0, 1].
template <typename T>
Ref<T> matching_confidence(Ref<T> cur, Ref<T> warped_prev, T eps) {
  if (eps <= T(0)) throw numeric_error("matching_confidence: eps must be > 0");
  require_same_shape(cur.val(), warped_prev.val(), "matching_confidence");
  return exp_(mul_scalar(channel_mean(abs_(sub(cur, warped_prev))), -eps));
}

/// Per-pixel, per-channel SSIM map with a 3x3 mean window,
/// C1 = 0.01^2, C2 = 0.03^2.
template <typename T>
Ref<T> ssim(Ref<T> x, Ref<T> y) {
  require_same_shape(x.val(), y.val(), "ssim");
  const T c1 = T(0.01) * T(0.01), c2 = T(0.03) * T(0.03);
  Ref<T> mx = boxfilter3(x), my = boxfilter3(y);
  Ref<T> mx2 = mul(mx, mx), my2 = mul(my, my), mxy = mul(mx, my);
  Ref<T> sx = sub(boxfilter3(mul(x, x)), mx2);
  Ref<T> sy = sub(boxfilter3(mul(y, y)), my2);
  Ref<T> sxy = sub(boxfilter3(mul(x, y)), mxy);
  Ref<T> num = mul(add_scalar(mul_scalar(mxy, T(2)), c1),
                   add_scalar(mul_scalar(sxy, T(2)), c2));
  Ref<T> den = mul(add_scalar(add(mx2, my2), c1), add_scalar(add(sx, sy), c2));
  return div(num, den);
}

}  // namespace fgd
