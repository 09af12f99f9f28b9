#pragma once

#include <map>
#include <string>

#include "fgd/tape.hpp"
#include "fgd/tensor.hpp"

namespace fgd {

/// One layer's learnables. Weight is (out_ch, in_ch, k, k) for convolutions
/// and (in_ch, out_ch, k, k) for up-convolutions; bias may be absent (the
/// hidden-state gate convolutions share the gate bias with their input twin).
template <typename T>
struct ParamEntry {
  Tensor<T> weight;
  Tensor<T> bias;  // size 0 when the layer has no bias

  bool has_bias() const { return bias.size() != 0; }
};

template <typename T>
using ParamSet = std::map<std::string, ParamEntry<T>>;

/// Tape handles for one layer, valid for the lifetime of a single tape.
template <typename T>
struct ParamRef {
  Ref<T> weight;
  Ref<T> bias;  // invalid Ref when the layer has no bias
};

template <typename T>
using ParamRefSet = std::map<std::string, ParamRef<T>>;

template <typename T>
ParamRefSet<T> load_params(Tape<T>& tape, const ParamSet<T>& params) {
  ParamRefSet<T> refs;
  for (const auto& [name, p] : params) {
    ParamRef<T> r;
    r.weight = tape.variable(p.weight);
    if (p.has_bias()) r.bias = tape.variable(p.bias);
    refs[name] = r;
  }
  return refs;
}

/// Reads gradients for every parameter after backward(); zeros where a
/// parameter did not participate.
template <typename T>
ParamSet<T> collect_grads(Tape<T>& tape, const ParamRefSet<T>& refs) {
  ParamSet<T> grads;
  for (const auto& [name, r] : refs) {
    ParamEntry<T> g;
    g.weight = tape.gradient(r.weight);
    if (r.bias.valid()) g.bias = tape.gradient(r.bias);
    grads[name] = g;
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
  struct Moments {
    Tensor<T> m_w, v_w, m_b, v_b;
  };
  std::map<std::string, Moments> moments;
  long step = 0;
  T lr = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

namespace detail {

template <typename T>
void adam_update(Tensor<T>& p, const Tensor<T>& g, Tensor<T>& m, Tensor<T>& v,
                 T lr_t, T b1, T b2, T eps) {
  if (m.size() == 0) m = Tensor<T>(p.n, p.c, p.h, p.w);
  if (v.size() == 0) v = Tensor<T>(p.n, p.c, p.h, p.w);
  if (!p.same_shape(g))
    throw shape_error("adam_step: gradient shape mismatch (" + p.shape_str() +
                      ") vs (" + g.shape_str() + ")");
  for (size_t i = 0; i < p.size(); ++i) {
    m.data[i] = b1 * m.data[i] + (T(1) - b1) * g.data[i];
    v.data[i] = b2 * v.data[i] + (T(1) - b2) * g.data[i] * g.data[i];
    p.data[i] -= lr_t * m.data[i] / (std::sqrt(v.data[i]) + eps);
  }
}

}  // namespace detail

/// Standard Adam with bias correction folded into the step size.
template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads,
               AdamState<T>& state) {
  state.step += 1;
  const T b1t = T(1) - std::pow(state.beta1, T(state.step));
  const T b2t = T(1) - std::pow(state.beta2, T(state.step));
  const T lr_t = state.lr * std::sqrt(b2t) / b1t;
  for (auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end())
      throw shape_error("adam_step: missing gradient for " + name);
    auto& mom = state.moments[name];
    detail::adam_update(p.weight, it->second.weight, mom.m_w, mom.v_w, lr_t,
                        state.beta1, state.beta2, state.eps);
    if (p.has_bias())
      detail::adam_update(p.bias, it->second.bias, mom.m_b, mom.v_b, lr_t,
                          state.beta1, state.beta2, state.eps);
  }
}

}  // namespace fgd
