#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "fgd/flowgru.hpp"
#include "fgd/params.hpp"
#include "fgd/tape.hpp"

namespace fgd {

/// Channel counts and sizes of the full-scale architecture, divided by
/// channel_scale for desk-size runs (scale 1 = full, 8 = default desk scale).
struct ModelConfig {
  int channel_scale = 8;
  int height = 64;
  int width = 192;
  double confidence_eps = 1.0;

  int sc(int base) const { return std::max(1, base / channel_scale); }
  int hidden_ch() const { return sc(64); }
  int input_ch() const { return 2 * sc(64); }  // concatenated stream features

  void validate() const {
    if (channel_scale < 1) throw shape_error("channel_scale must be >= 1");
    if (height % 4 != 0 || width % 4 != 0)
      throw shape_error("input size must be divisible by 4, got " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
};

/// Which parts of the memory path to switch off (the paper-style ablations).
struct Ablation {
  bool disable_memory = false;      // h_bar forced to zero every step
  bool disable_flow = false;        // zero flow into align_state (plain ConvGRU)
  bool disable_confidence = false;  // M == 1
};

template <typename T>
struct ModelParams {
  ParamSet<T> spatial;      // encoder, image stream
  ParamSet<T> temporal;     // encoder, flow stream
  ParamSet<T> memory;       // Gxz..Ghh
  ParamSet<T> decoder;      // Dconv1a..Output
  ParamSet<T> flow_refine;  // Fconv1a..R3
};

template <typename T>
struct ModelParamRefs {
  ParamRefSet<T> spatial, temporal, memory, decoder, flow_refine;
};

template <typename T>
ModelParamRefs<T> load_model(Tape<T>& tape, const ModelParams<T>& p) {
  return ModelParamRefs<T>{load_params(tape, p.spatial),
                           load_params(tape, p.temporal),
                           load_params(tape, p.memory),
                           load_params(tape, p.decoder),
                           load_params(tape, p.flow_refine)};
}

/// Optional per-layer output shape recorder (layer name -> n,c,h,w).
using ShapeLog = std::map<std::string, std::array<int, 4>>;

// ---------------------------------------------------------------------------
// Architecture table
// ---------------------------------------------------------------------------

struct LayerDef {
  const char* name;
  int kernel, stride, dilation;
  int in_base, out_base;  // full-scale channel counts
  bool relu = true;
};

// Encoder: conv layers downsample twice, dilated layers widen the receptive
// field at quarter resolution.
inline constexpr LayerDef kEncoderLayers[] = {
    {"Econv1a", 3, 2, 1, 3, 32},    {"Econv1b", 3, 1, 1, 32, 32},
    {"Econv2a", 3, 2, 1, 32, 64},   {"Econv2b", 3, 1, 1, 64, 64},
    {"Econv3a", 3, 1, 2, 64, 64},   {"Econv3b", 3, 1, 1, 64, 64},
    {"Econv4a", 3, 1, 4, 64, 64},   {"Econv4b", 3, 1, 1, 64, 64},
    {"Econv5a", 3, 1, 8, 64, 128},  {"Econv5b", 3, 1, 1, 128, 128},
    {"Econv6a", 3, 1, 16, 128, 128}, {"Econv6b", 3, 1, 1, 128, 128},
    {"Econv7a", 3, 1, 16, 128, 256}, {"Econv7b", 3, 1, 1, 256, 256},
    {"Econv8a", 3, 1, 1, 256, 256}, {"Econv8b", 3, 1, 1, 256, 64},
};

namespace detail {

// channel counts of 1 (depth), 2 (flow) and 3 (image) are structural and
// never scaled
inline int scaled(const ModelConfig& cfg, int base) {
  return base <= 3 ? base : cfg.sc(base);
}

template <typename T>
ParamEntry<T> make_conv_entry(int in_ch, int out_ch, int k, bool transpose,
                              std::mt19937_64& rng) {
  ParamEntry<T> e;
  e.weight = transpose ? Tensor<T>(in_ch, out_ch, k, k)
                       : Tensor<T>(out_ch, in_ch, k, k);
  glorot_fill(e.weight, in_ch * k * k, out_ch * k * k, rng);
  e.bias = Tensor<T>(1, 1, 1, out_ch);
  return e;
}

}  // namespace detail

template <typename T>
ParamSet<T> make_encoder_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  ParamSet<T> p;
  for (const LayerDef& l : kEncoderLayers)
    p[l.name] = detail::make_conv_entry<T>(detail::scaled(cfg, l.in_base),
                                           detail::scaled(cfg, l.out_base),
                                           l.kernel, false, rng);
  return p;
}

template <typename T>
ParamSet<T> make_decoder_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  ParamSet<T> p;
  p["Dconv1a"] =
      detail::make_conv_entry<T>(cfg.sc(64), cfg.sc(32), 5, true, rng);
  p["Dconv1b"] =
      detail::make_conv_entry<T>(3 * cfg.sc(32), cfg.sc(32), 5, false, rng);
  p["Dconv2a"] =
      detail::make_conv_entry<T>(cfg.sc(32), cfg.sc(16), 5, true, rng);
  p["Dconv2b"] =
      detail::make_conv_entry<T>(cfg.sc(16), cfg.sc(16), 5, false, rng);
  p["Output"] = detail::make_conv_entry<T>(cfg.sc(16), 1, 5, false, rng);
  return p;
}

template <typename T>
ParamSet<T> make_flow_refine_params(const ModelConfig& cfg,
                                    std::mt19937_64& rng) {
  ParamSet<T> p;
  const int f = cfg.sc(32);
  p["Fconv1a"] = detail::make_conv_entry<T>(8, f, 3, false, rng);
  p["Fconv1b"] = detail::make_conv_entry<T>(f, 2, 3, false, rng);
  p["R1"] = detail::make_conv_entry<T>(4, 2, 3, false, rng);
  p["Fconv2a"] = detail::make_conv_entry<T>(f, f, 3, false, rng);
  p["Fconv2b"] = detail::make_conv_entry<T>(f + 2, 2, 3, false, rng);
  p["R2"] = detail::make_conv_entry<T>(4, 2, 3, false, rng);
  p["Fconv3a"] = detail::make_conv_entry<T>(f, f, 3, false, rng);
  p["Fconv3b"] = detail::make_conv_entry<T>(f + 2, 2, 3, false, rng);
  p["R3"] = detail::make_conv_entry<T>(4, 2, 3, false, rng);
  return p;
}

template <typename T>
ModelParams<T> init_model_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams<T> p;
  p.spatial = make_encoder_params<T>(cfg, rng);
  p.temporal = make_encoder_params<T>(cfg, rng);
  p.memory = make_flowgru_params<T>(cfg.input_ch(), cfg.hidden_ch(), rng);
  p.decoder = make_decoder_params<T>(cfg, rng);
  p.flow_refine = make_flow_refine_params<T>(cfg, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Ref<T> apply_conv(Ref<T> x, const ParamRef<T>& p, const LayerDef& l,
                  const ModelConfig& cfg) {
  ConvSpec spec = ConvSpec::same(l.kernel, l.stride, l.dilation,
                                 scaled(cfg, l.in_base), scaled(cfg, l.out_base));
  Ref<T> y = conv2d(x, p.weight, p.bias, spec);
  return l.relu ? relu(y) : y;
}

template <typename T>
void log_shape(ShapeLog* log, const std::string& name, const Tensor<T>& v) {
  if (log) (*log)[name] = {v.n, v.c, v.h, v.w};
}

}  // namespace detail

template <typename T>
struct EncodeResult {
  Ref<T> features;  // Econv8b output at 1/4 resolution
  Ref<T> skip;      // Econv1b output at 1/2 resolution
};

template <typename T>
EncodeResult<T> encode_stream(Ref<T> input, const ParamRefSet<T>& params,
                              const ModelConfig& cfg, ShapeLog* shapes = nullptr,
                              const std::string& prefix = "") {
  const Tensor<T>& iv = input.val();
  if (iv.h % 4 != 0 || iv.w % 4 != 0)
    throw shape_error("encode_stream: spatial size not divisible by 4 (" +
                      iv.shape_str() + ")");
  Ref<T> x = input;
  Ref<T> skip{};
  for (const LayerDef& l : kEncoderLayers) {
    x = detail::apply_conv(x, params.at(l.name), l, cfg);
    detail::log_shape(shapes, prefix + l.name, x.val());
    if (std::string(l.name) == "Econv1b") skip = x;
  }
  return EncodeResult<T>{x, skip};
}

template <typename T>
struct RefinedFlows {
  Ref<T> r1;  // full resolution
  Ref<T> r2;  // 1/2
  Ref<T> r3;  // 1/4
};

/// Residual flow refinement at three scales. Downsampled flow fields are
/// rescaled (x0.5 per octave) so displacements stay in pixel units.
template <typename T>
RefinedFlows<T> refine_flow(Ref<T> I_t, Ref<T> I_prev, Ref<T> O_t,
                            const ParamRefSet<T>& params, const ModelConfig& cfg,
                            ShapeLog* shapes = nullptr) {
  require_same_shape(I_t.val(), I_prev.val(), "refine_flow");
  if (O_t.val().c != 2) throw shape_error("refine_flow: flow must have 2 channels");
  const int f = cfg.sc(32);
  auto layer = [&](const char* name, Ref<T> in, int in_ch, int out_ch,
                   int stride, bool act) {
    const ParamRef<T>& p = params.at(name);
    Ref<T> y = conv2d(in, p.weight, p.bias,
                      ConvSpec::same(3, stride, 1, in_ch, out_ch));
    if (act) y = relu(y);
    detail::log_shape(shapes, std::string("refine/") + name, y.val());
    return y;
  };
  Ref<T> f1a = layer("Fconv1a", concat_channels<T>({I_t, I_prev, O_t}), 8, f, 1, true);
  Ref<T> f1b = layer("Fconv1b", f1a, f, 2, 1, false);
  Ref<T> r1 = layer("R1", concat_channels<T>({f1b, O_t}), 4, 2, 1, false);
  Ref<T> o_half = downsample2x(O_t, /*is_flow=*/true);
  Ref<T> f2a = layer("Fconv2a", f1a, f, f, 2, true);
  Ref<T> f2b = layer("Fconv2b",
                     concat_channels<T>({f2a, downsample2x(r1, true)}), f + 2, 2,
                     1, false);
  Ref<T> r2 = layer("R2", concat_channels<T>({f2b, o_half}), 4, 2, 1, false);
  Ref<T> f3a = layer("Fconv3a", f2a, f, f, 2, true);
  Ref<T> f3b = layer("Fconv3b",
                     concat_channels<T>({f3a, downsample2x(r2, true)}), f + 2, 2,
                     1, false);
  Ref<T> r3 = layer("R3",
                    concat_channels<T>({f3b, downsample2x(o_half, true)}), 4, 2,
                    1, false);
  return RefinedFlows<T>{r1, r2, r3};
}

/// Depth head: up-convolve the hidden state, merge the half-resolution skips,
/// and map the final linear output through exp so depth stays positive.
template <typename T>
Ref<T> decode(Ref<T> h, Ref<T> skip_spatial, Ref<T> skip_temporal,
              const ParamRefSet<T>& params, const ModelConfig& cfg,
              ShapeLog* shapes = nullptr) {
  auto up = [&](const char* name, Ref<T> in, int in_ch, int out_ch) {
    const ParamRef<T>& p = params.at(name);
    ConvSpec spec = ConvSpec::same(5, 2, 1, in_ch, out_ch);
    Ref<T> y = relu(conv2d_transpose(in, p.weight, p.bias, spec));
    detail::log_shape(shapes, std::string("decoder/") + name, y.val());
    return y;
  };
  auto cv = [&](const char* name, Ref<T> in, int in_ch, int out_ch, bool act) {
    const ParamRef<T>& p = params.at(name);
    Ref<T> y = conv2d(in, p.weight, p.bias, ConvSpec::same(5, 1, 1, in_ch, out_ch));
    if (act) y = relu(y);
    detail::log_shape(shapes, std::string("decoder/") + name, y.val());
    return y;
  };
  Ref<T> d1a = up("Dconv1a", h, cfg.sc(64), cfg.sc(32));
  Ref<T> d1b = cv("Dconv1b", concat_channels<T>({d1a, skip_spatial, skip_temporal}),
                  3 * cfg.sc(32), cfg.sc(32), true);
  Ref<T> d2a = up("Dconv2a", d1b, cfg.sc(32), cfg.sc(16));
  Ref<T> d2b = cv("Dconv2b", d2a, cfg.sc(16), cfg.sc(16), true);
  Ref<T> y = cv("Output", d2b, cfg.sc(16), 1, false);
  return exp_(y);
}

template <typename T>
struct StepOutput {
  Ref<T> depth;               // (1,1,H,W), positive
  Ref<T> r1, r2, r3;          // refined flows (invalid on the first frame)
  Ref<T> hidden;              // new hidden state at 1/4 resolution
  Ref<T> confidence;          // quarter-resolution matching confidence
  Ref<T> skip_spatial, skip_temporal;
};

namespace detail {

// temporal-stream input: (dx, dy, |flow|) so Econv1a sees 3 channels
template <typename T>
Ref<T> temporal_input(Ref<T> flow) {
  Ref<T> mag = sqrt_(add_scalar(
      mul_scalar(channel_mean(mul(flow, flow)), T(2)), T(1e-12)));
  return concat_channels<T>({flow, mag});
}

}  // namespace detail

/// One recurrent step. For the first frame pass an invalid h_prev: the state
/// starts at zero, flow refinement is skipped, and the step reduces to a pure
/// encoding of the frame.
template <typename T>
StepOutput<T> forward_step(Tape<T>& tape, Ref<T> I_t, Ref<T> I_prev, Ref<T> O_t,
                           Ref<T> h_prev, const ModelParamRefs<T>& params,
                           const ModelConfig& cfg, const Ablation& abl = {},
                           ShapeLog* shapes = nullptr) {
  // copy the dimensions: references into the tape dangle once ops are pushed
  const int bn = I_t.val().n, bh = I_t.val().h, bw = I_t.val().w;
  StepOutput<T> out;
  const bool first = !I_prev.valid();
  if (!first && !h_prev.valid())
    throw shape_error("forward_step: previous frame given without a hidden state");

  Ref<T> flow_in = first ? tape.constant(Tensor<T>(bn, 2, bh, bw)) : O_t;
  if (!first) {
    RefinedFlows<T> rf =
        refine_flow(I_t, I_prev, O_t, params.flow_refine, cfg, shapes);
    out.r1 = rf.r1;
    out.r2 = rf.r2;
    out.r3 = rf.r3;
  }

  EncodeResult<T> es =
      encode_stream(I_t, params.spatial, cfg, shapes, "spatial/");
  EncodeResult<T> et = encode_stream(detail::temporal_input(flow_in),
                                     params.temporal, cfg, shapes, "temporal/");
  Ref<T> x = concat_channels<T>({es.features, et.features});
  out.skip_spatial = es.skip;
  out.skip_temporal = et.skip;

  const int qh = x.val().h, qw = x.val().w;
  if (first || abl.disable_memory) {
    Tensor<T> ones(bn, 1, qh, qw, T(1));
    out.confidence = tape.constant(ones);
    Ref<T> h_zero = tape.constant(Tensor<T>(bn, cfg.hidden_ch(), qh, qw));
    out.hidden = gru_update(x, h_zero, params.memory);
  } else {
    Ref<T> flow_q = abl.disable_flow
                        ? tape.constant(Tensor<T>(bn, 2, qh, qw))
                        : out.r3;
    Ref<T> i3t = downsample2x(downsample2x(I_t));
    Ref<T> i3p = downsample2x(downsample2x(I_prev));
    Ref<T> conf =
        abl.disable_confidence
            ? tape.constant(Tensor<T>(bn, 1, qh, qw, T(1)))
            : matching_confidence(i3t, bilinear_warp(i3p, flow_q),
                                  T(cfg.confidence_eps));
    out.confidence = conf;
    out.hidden = flowgru_step(x, h_prev, flow_q, conf, params.memory);
  }
  out.depth =
      decode(out.hidden, es.skip, et.skip, params.decoder, cfg, shapes);
  detail::log_shape(shapes, "depth", out.depth.val());
  return out;
}

/// Left-to-right pass over a window of frames. flows[t] aligns frame t to
/// frame t-1; flows.size() == frames.size() - 1 (or equal, entry 0 unused).
template <typename T>
std::vector<StepOutput<T>> forward_sequence(
    Tape<T>& tape, const std::vector<Tensor<T>>& frames,
    const std::vector<Tensor<T>>& flows, const ModelParamRefs<T>& params,
    const ModelConfig& cfg, const Ablation& abl = {}) {
  if (frames.empty()) throw shape_error("forward_sequence: no frames");
  std::vector<StepOutput<T>> outs;
  Ref<T> h_prev{};
  Ref<T> prev_frame{};
  for (size_t t = 0; t < frames.size(); ++t) {
    Ref<T> I_t = tape.constant(frames[t]);
    Ref<T> O_t{};
    if (t > 0) {
      const size_t fi = flows.size() == frames.size() ? t : t - 1;
      if (fi >= flows.size())
        throw shape_error("forward_sequence: missing flow for frame " +
                          std::to_string(t));
      O_t = tape.constant(flows[fi]);
    }
    StepOutput<T> s =
        forward_step(tape, I_t, prev_frame, O_t, h_prev, params, cfg, abl);
    outs.push_back(s);
    prev_frame = I_t;
    h_prev = s.hidden;
  }
  return outs;
}

}  // namespace fgd
