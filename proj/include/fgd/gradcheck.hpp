#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fgd/losses.hpp"
#include "fgd/network.hpp"
#include "fgd/tape.hpp"

namespace fgd {

/// Central finite-difference verification of the backward pass, meant to run
/// in double precision with h = 1e-4 and a 1e-4 relative tolerance.
struct GradCheckCase {
  std::string name;
  double max_err = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;

  bool all_pass() const {
    for (const auto& c : cases)
      if (!c.pass) return false;
    return true;
  }
};

namespace gradcheck_detail {

using Build = std::function<Ref<double>(Tape<double>&,
                                        const std::vector<Ref<double>>&)>;

inline double eval(const std::vector<Tensor<double>>& inputs,
                   const Build& build) {
  Tape<double> tape;
  std::vector<Ref<double>> refs;
  for (const auto& t : inputs) refs.push_back(tape.constant(t));
  Ref<double> loss = build(tape, refs);
  if (loss.val().size() != 1)
    throw shape_error("gradcheck: objective must be scalar");
  return loss.val().data[0];
}

inline GradCheckCase run_case(const std::string& name,
                              std::vector<Tensor<double>> inputs,
                              const Build& build, double h = 1e-4,
                              double tol = 1e-4) {
  GradCheckCase result{name, 0, false};
  Tape<double> tape;
  std::vector<Ref<double>> refs;
  for (const auto& t : inputs) refs.push_back(tape.variable(t));
  Ref<double> loss = build(tape, refs);
  if (loss.val().size() != 1)
    throw shape_error("gradcheck: objective must be scalar");
  tape.backward(loss);
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double> analytic = tape.gradient(refs[i]);
    for (size_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = inputs[i].data[j];
      inputs[i].data[j] = orig + h;
      const double fp = eval(inputs, build);
      inputs[i].data[j] = orig - h;
      const double fm = eval(inputs, build);
      inputs[i].data[j] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic.data[j];
      const double err = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 0.1});
      result.max_err = std::max(result.max_err, err);
    }
  }
  result.pass = result.max_err <= tol;
  return result;
}

inline Tensor<double> rand_tensor(int n, int c, int h, int w,
                                  std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  Tensor<double> t(n, c, h, w);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data) v = d(rng);
  return t;
}

// flow whose warp samples stay strictly inside the image and away from
// integer coordinates, where the warp gradient has kinks
inline Tensor<double> safe_flow(int h, int w, std::mt19937_64& rng) {
  Tensor<double> f(1, 2, h, w);
  std::uniform_real_distribution<double> frac(0.2, 0.8);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int tx = std::clamp(x + (int(rng() % 3) - 1), 0, w - 2);
      const int ty = std::clamp(y + (int(rng() % 3) - 1), 0, h - 2);
      f.at(0, 0, y, x) = tx + frac(rng) - x;
      f.at(0, 1, y, x) = ty + frac(rng) - y;
    }
  return f;
}

// keeps values away from the kinks of |.| and relu
inline Tensor<double> rand_away_from_zero(int n, int c, int h, int w,
                                          std::mt19937_64& rng) {
  Tensor<double> t = rand_tensor(n, c, h, w, rng, 0.1, 1.0);
  std::uniform_int_distribution<int> sign(0, 1);
  for (auto& v : t.data)
    if (sign(rng)) v = -v;
  return t;
}

// Moves biases off zero so relu pre-activations sit at a generic point.
// With zero-initialized biases, units whose receptive field is entirely
// relu-dead have a pre-activation of exactly 0, and central differences
// straddle the kink no matter how small the step is.
inline void randomize_biases(ParamSet<double>& ps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.05, 0.3);
  std::uniform_int_distribution<int> sign(0, 1);
  for (auto& [name, e] : ps)
    for (auto& v : e.bias.data) v = sign(rng) ? mag(rng) : -mag(rng);
}

// appends every tensor of a ParamSet to the input list (weight, then bias)
inline void push_params(const ParamSet<double>& ps,
                        std::vector<Tensor<double>>& inputs) {
  for (const auto& [name, e] : ps) {
    inputs.push_back(e.weight);
    if (e.has_bias()) inputs.push_back(e.bias);
  }
}

// rebuilds a ParamRefSet from the refs laid out by push_params
inline ParamRefSet<double> refs_params(const ParamSet<double>& ps,
                                       const std::vector<Ref<double>>& refs,
                                       size_t& pos) {
  ParamRefSet<double> out;
  for (const auto& [name, e] : ps) {
    ParamRef<double> r;
    r.weight = refs[pos++];
    if (e.has_bias()) r.bias = refs[pos++];
    out[name] = r;
  }
  return out;
}

}  // namespace gradcheck_detail

/// Runs the full primitive-by-primitive suite; every case draws from the same
/// seeded generator so the run is deterministic.
inline GradCheckReport run_gradcheck(uint64_t seed = 7) {
  using namespace gradcheck_detail;
  std::mt19937_64 rng(seed);
  GradCheckReport report;
  auto check = [&](const std::string& name, std::vector<Tensor<double>> inputs,
                 const Build& build) {
    report.cases.push_back(run_case(name, std::move(inputs), build));
  };
  auto scalar = [](Ref<double> x) { return mean_all(x); };

  // elementwise
  check("sigmoid", {rand_tensor(1, 2, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(sigmoid(r[0]));
      });
  check("tanh", {rand_tensor(1, 2, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(tanh_(r[0]));
      });
  check("exp", {rand_tensor(1, 2, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(exp_(r[0]));
      });
  check("log", {rand_tensor(1, 2, 4, 4, rng, 0.5, 2.0)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(log_(r[0]));
      });
  check("sqrt", {rand_tensor(1, 2, 4, 4, rng, 0.5, 2.0)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(sqrt_(r[0]));
      });
  check("abs", {rand_away_from_zero(1, 2, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(abs_(r[0]));
      });
  check("relu", {rand_away_from_zero(1, 2, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(relu(r[0]));
      });
  check("add_mul_scalar", {rand_tensor(1, 2, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(add_scalar(mul_scalar(neg(r[0]), 1.7), 0.3));
      });
  check("add_sub_mul",
      {rand_tensor(1, 2, 4, 4, rng), rand_tensor(1, 2, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(mul(add(r[0], r[1]), sub(r[0], r[1])));
      });
  check("div", {rand_tensor(1, 2, 4, 4, rng), rand_tensor(1, 2, 4, 4, rng, 0.5, 2.0)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(div(r[0], r[1]));
      });
  check("broadcast_mul",
      {rand_tensor(1, 3, 4, 4, rng), rand_tensor(1, 1, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(mul(r[0], r[1]));
      });
  check("concat_channel_mean",
      {rand_tensor(1, 2, 4, 4, rng), rand_tensor(1, 3, 4, 4, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(channel_mean(concat_channels<double>({r[0], r[1]})));
      });
  check("sum_all", {rand_tensor(1, 2, 3, 3, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mul_scalar(sum_all(mul(r[0], r[0])), 0.25);
      });

  // convolutions
  {
    ConvSpec s = ConvSpec::same(3, 1, 2, 2, 3);
    check("conv2d_dilated",
        {rand_tensor(1, 2, 6, 6, rng), rand_tensor(3, 2, 3, 3, rng),
         rand_tensor(1, 1, 1, 3, rng)},
        [s, scalar](Tape<double>&, const std::vector<Ref<double>>& r) {
          return scalar(conv2d(r[0], r[1], r[2], s));
        });
  }
  {
    ConvSpec s = ConvSpec::same(3, 2, 1, 2, 3);
    check("conv2d_stride2",
        {rand_tensor(1, 2, 6, 6, rng), rand_tensor(3, 2, 3, 3, rng),
         rand_tensor(1, 1, 1, 3, rng)},
        [s, scalar](Tape<double>&, const std::vector<Ref<double>>& r) {
          return scalar(conv2d(r[0], r[1], r[2], s));
        });
  }
  {
    ConvSpec s = ConvSpec::same(5, 2, 1, 3, 2);
    check("conv2d_transpose",
        {rand_tensor(1, 3, 3, 3, rng), rand_tensor(3, 2, 5, 5, rng),
         rand_tensor(1, 1, 1, 2, rng)},
        [s, scalar](Tape<double>&, const std::vector<Ref<double>>& r) {
          return scalar(conv2d_transpose(r[0], r[1], r[2], s));
        });
  }

  // image ops
  check("bilinear_warp",
      {rand_tensor(1, 2, 6, 6, rng), safe_flow(6, 6, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(mul(bilinear_warp(r[0], r[1]),
                            bilinear_warp(r[0], r[1])));
      });
  check("downsample2x", {rand_tensor(1, 2, 6, 6, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(mul(downsample2x(r[0]), downsample2x(r[0], true)));
      });
  check("laplacian", {rand_tensor(1, 2, 5, 5, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(mul(laplacian(r[0]), laplacian(r[0])));
      });
  check("boxfilter3", {rand_tensor(1, 2, 5, 5, rng)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(mul(boxfilter3(r[0]), boxfilter3(r[0])));
      });
  check("ssim",
      {rand_tensor(1, 3, 6, 6, rng, 0.1, 0.9), rand_tensor(1, 3, 6, 6, rng, 0.1, 0.9)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(ssim(r[0], r[1]));
      });
  check("matching_confidence",
      {rand_tensor(1, 3, 4, 4, rng, 0.1, 0.9), rand_tensor(1, 3, 4, 4, rng, 0.1, 0.9)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return mean_all(matching_confidence(r[0], r[1], 1.0));
      });

  // losses
  {
    Tensor<double> G = rand_tensor(1, 1, 5, 5, rng, 1.0, 10.0);
    G.data[3] = 0;  // a masked-out pixel
    G.data[17] = 0;
    check("scale_invariant_loss", {rand_tensor(1, 1, 5, 5, rng, 0.5, 8.0)},
        [G](Tape<double>&, const std::vector<Ref<double>>& r) {
          return scale_invariant_loss(r[0], G, 0.5);
        });
  }
  {
    Tensor<double> I = rand_tensor(1, 3, 5, 5, rng, 0.0, 1.0);
    check("smoothness_loss", {rand_tensor(1, 1, 5, 5, rng, 0.5, 2.0)},
        [I](Tape<double>&, const std::vector<Ref<double>>& r) {
          return smoothness_loss(r[0], I, 10.0);
        });
    check("flow_smoothness_loss", {rand_tensor(1, 2, 5, 5, rng)},
        [I](Tape<double>&, const std::vector<Ref<double>>& r) {
          return flow_smoothness_loss(r[0], I, 10.0);
        });
  }
  check("photometric_loss",
      {rand_tensor(1, 3, 6, 6, rng, 0.1, 0.9), rand_tensor(1, 3, 6, 6, rng, 0.1, 0.9)},
      [&](Tape<double>&, const std::vector<Ref<double>>& r) {
        return photometric_loss(r[0], r[1], 0.85);
      });

  // composite blocks at minimal width (channel_scale 64), 8x8 inputs
  ModelConfig cfg;
  cfg.channel_scale = 64;
  cfg.height = 8;
  cfg.width = 8;
  {
    ParamSet<double> gru = make_flowgru_params<double>(cfg.input_ch(),
                                                       cfg.hidden_ch(), rng);
    randomize_biases(gru, rng);
    std::vector<Tensor<double>> inputs = {
        rand_tensor(1, cfg.input_ch(), 2, 2, rng),
        rand_tensor(1, cfg.hidden_ch(), 2, 2, rng), safe_flow(2, 2, rng),
        rand_tensor(1, 1, 2, 2, rng, 0.2, 0.9)};
    push_params(gru, inputs);
    check("flowgru_step", std::move(inputs),
        [gru](Tape<double>&, const std::vector<Ref<double>>& r) {
          size_t pos = 4;
          ParamRefSet<double> p = refs_params(gru, r, pos);
          return mean_all(flowgru_step(r[0], r[1], r[2], r[3], p));
        });
  }
  {
    ParamSet<double> fr = make_flow_refine_params<double>(cfg, rng);
    randomize_biases(fr, rng);
    std::vector<Tensor<double>> inputs = {
        rand_tensor(1, 3, 8, 8, rng, 0.1, 0.9),
        rand_tensor(1, 3, 8, 8, rng, 0.1, 0.9), safe_flow(8, 8, rng)};
    push_params(fr, inputs);
    check("refine_flow", std::move(inputs),
        [fr, cfg](Tape<double>&, const std::vector<Ref<double>>& r) {
          size_t pos = 3;
          ParamRefSet<double> p = refs_params(fr, r, pos);
          RefinedFlows<double> out = refine_flow(r[0], r[1], r[2], p, cfg);
          return mean_all(add(downsample2x(downsample2x(out.r1), true),
                              add(downsample2x(out.r2, true), out.r3)));
        });
  }
  {
    ParamSet<double> dec = make_decoder_params<double>(cfg, rng);
    randomize_biases(dec, rng);
    std::vector<Tensor<double>> inputs = {
        rand_tensor(1, cfg.sc(64), 2, 2, rng),
        rand_tensor(1, cfg.sc(32), 4, 4, rng),
        rand_tensor(1, cfg.sc(32), 4, 4, rng)};
    push_params(dec, inputs);
    check("decode", std::move(inputs),
        [dec, cfg](Tape<double>&, const std::vector<Ref<double>>& r) {
          size_t pos = 3;
          ParamRefSet<double> p = refs_params(dec, r, pos);
          return mean_all(decode(r[0], r[1], r[2], p, cfg));
        });
  }
  return report;
}

}  // namespace fgd
