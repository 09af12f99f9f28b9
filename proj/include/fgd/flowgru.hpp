#pragma once

#include "fgd/params.hpp"
#include "fgd/tape.hpp"

namespace fgd {

/// Recurrent state of the flow-guided memory, carried along a sequence.
template <typename T>
struct HiddenState {
  Tensor<T> h;
  int t = 0;
};

template <typename T>
HiddenState<T> init_state(int hidden_ch, int height, int width) {
  return HiddenState<T>{Tensor<T>(1, hidden_ch, height, width), 0};
}

/// Gate convolution kernel size (Table-style k=5 layers).
inline constexpr int kGruKernel = 5;

/// Creates the memory cell's parameters: Gxz/Gxr/Gxh carry the gate biases,
/// Ghz/Ghr/Ghh are bias-free.
template <typename T>
ParamSet<T> make_flowgru_params(int input_ch, int hidden_ch,
                                std::mt19937_64& rng) {
  ParamSet<T> p;
  const int k = kGruKernel;
  for (const char* name : {"Gxz", "Gxr", "Gxh"}) {
    ParamEntry<T> e;
    e.weight = Tensor<T>(hidden_ch, input_ch, k, k);
    glorot_fill(e.weight, input_ch * k * k, hidden_ch * k * k, rng);
    e.bias = Tensor<T>(1, 1, 1, hidden_ch);
    p[name] = std::move(e);
  }
  for (const char* name : {"Ghz", "Ghr", "Ghh"}) {
    ParamEntry<T> e;
    e.weight = Tensor<T>(hidden_ch, hidden_ch, k, k);
    glorot_fill(e.weight, hidden_ch * k * k, hidden_ch * k * k, rng);
    p[name] = std::move(e);
  }
  return p;
}

/// h_bar = conf (.) warp(h_prev; flow_q), confidence broadcast over channels.
template <typename T>
Ref<T> align_state(Ref<T> h_prev, Ref<T> flow_q, Ref<T> conf) {
  const Tensor<T>& hv = h_prev.val();
  const Tensor<T>& cv = conf.val();
  if (cv.c != 1 || cv.h != hv.h || cv.w != hv.w)
    throw shape_error("align_state: confidence (" + cv.shape_str() +
                      ") does not match hidden state (" + hv.shape_str() + ")");
  return mul(bilinear_warp(h_prev, flow_q), conf);
}

namespace detail {

template <typename T>
Ref<T> gate_pre(Ref<T> x, Ref<T> h_bar, const ParamRefSet<T>& p,
                const char* wx, const char* wh) {
  const ParamRef<T>& px = p.at(wx);
  const ParamRef<T>& ph = p.at(wh);
  const Tensor<T>& wxv = px.weight.val();
  const Tensor<T>& whv = ph.weight.val();
  ConvSpec sx = ConvSpec::same(kGruKernel, 1, 1, wxv.c, wxv.n);
  ConvSpec sh = ConvSpec::same(kGruKernel, 1, 1, whv.c, whv.n);
  return add(conv2d(x, px.weight, px.bias, sx),
             conv2d(h_bar, ph.weight, ph.bias, sh));
}

}  // namespace detail

/// One gated update on an already aligned state h_bar:
///   z = sigmoid(Wxz*x + Whz*h_bar + bz)
///   r = sigmoid(Wxr*x + Whr*h_bar + br)
///   h~ = tanh(Wxh*x + r (.) (Whh*h_bar) + bh)
///   h  = (1-z) (.) h_bar + z (.) h~
template <typename T>
Ref<T> gru_update(Ref<T> x, Ref<T> h_bar, const ParamRefSet<T>& p) {
  Ref<T> z = sigmoid(detail::gate_pre(x, h_bar, p, "Gxz", "Ghz"));
  Ref<T> r = sigmoid(detail::gate_pre(x, h_bar, p, "Gxr", "Ghr"));
  const ParamRef<T>& pxh = p.at("Gxh");
  const ParamRef<T>& phh = p.at("Ghh");
  const Tensor<T>& wxv = pxh.weight.val();
  const Tensor<T>& whv = phh.weight.val();
  ConvSpec sx = ConvSpec::same(kGruKernel, 1, 1, wxv.c, wxv.n);
  ConvSpec sh = ConvSpec::same(kGruKernel, 1, 1, whv.c, whv.n);
  Ref<T> cand = tanh_(add(conv2d(x, pxh.weight, pxh.bias, sx),
                          mul(r, conv2d(h_bar, phh.weight, phh.bias, sh))));
  Ref<T> keep = mul(add_scalar(neg(z), T(1)), h_bar);
  return add(keep, mul(z, cand));
}

/// Full step: align the previous state along the quarter-resolution refined
/// flow, gate it by matching confidence, then apply the GRU dynamics.
template <typename T>
Ref<T> flowgru_step(Ref<T> x, Ref<T> h_prev, Ref<T> flow_q, Ref<T> conf,
                    const ParamRefSet<T>& params) {
  Ref<T> h_bar = align_state(h_prev, flow_q, conf);
  return gru_update(x, h_bar, params);
}

}  // namespace fgd
