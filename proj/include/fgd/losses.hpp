#pragma once

#include <map>
#include <string>
#include <vector>

#include "fgd/network.hpp"
#include "fgd/tape.hpp"

namespace fgd {

struct LossConfig {
  double alpha = 0.5;     // scale-invariance weight
  double beta = 0.85;     // SSIM vs L1 balance
  double gamma = 10.0;    // edge-awareness bandwidth
  double epsilon = 1.0;   // matching-confidence bandwidth
  double lambda_d = 0.1;  // depth smoothness
  double lambda_o = 0.1;  // flow smoothness
  double lambda = 0.05;   // flow losses vs depth losses

  void validate() const {
    if (alpha < 0 || alpha > 1 || beta < 0 || beta > 1)
      throw numeric_error("LossConfig: alpha, beta must lie in [0,1]");
    if (lambda_d < 0 || lambda_o < 0 || lambda < 0)
      throw numeric_error("LossConfig: weights must be >= 0");
  }
};

/// Scale-invariant log-depth loss over valid (G > 0) pixels:
///   (1/N) sum s^2 - (alpha/N^2) (sum s)^2,   s = log D - log G.
/// The pairwise sum_{p,q} s(p)s(q) collapses to (sum s)^2, so this is O(N).
template <typename T>
Ref<T> scale_invariant_loss(Ref<T> D, const Tensor<T>& G, T alpha) {
  const Tensor<T>& dv = D.val();
  require_same_shape(dv, G, "scale_invariant_loss");
  Tensor<T> mask(G.n, G.c, G.h, G.w);
  Tensor<T> log_g(G.n, G.c, G.h, G.w);
  Tensor<T> fill(G.n, G.c, G.h, G.w);  // 1 at invalid pixels so log is safe
  long valid = 0;
  for (size_t i = 0; i < G.size(); ++i) {
    if (G.data[i] > T(0)) {
      if (dv.data[i] <= T(0))
        throw numeric_error("scale_invariant_loss: non-positive depth at a valid pixel");
      mask.data[i] = T(1);
      log_g.data[i] = std::log(G.data[i]);
      ++valid;
    } else {
      fill.data[i] = T(1);
    }
  }
  if (valid == 0) throw numeric_error("scale_invariant_loss: no valid pixels");
  Tape<T>& t = *D.tape;
  Ref<T> m = t.constant(std::move(mask));
  Ref<T> safe_d = add(mul(D, m), t.constant(std::move(fill)));
  Ref<T> s = mul(sub(log_(safe_d), t.constant(std::move(log_g))), m);
  Ref<T> sum_sq = sum_all(mul(s, s));
  Ref<T> sum_s = sum_all(s);
  const T n = T(valid);
  return sub(mul_scalar(sum_sq, T(1) / n),
             mul_scalar(mul(sum_s, sum_s), alpha / (n * n)));
}

/// Edge-aware second-order smoothness:
///   (1/N) sum mean_c|lap X| * exp(-gamma * mean_c|lap I|).
/// Shared by the depth (1-channel X) and flow (2-channel X) regularizers.
template <typename T>
Ref<T> smoothness_loss(Ref<T> X, const Tensor<T>& image, T gamma) {
  const Tensor<T>& xv = X.val();
  if (xv.h != image.h || xv.w != image.w || xv.n != image.n)
    throw shape_error("smoothness_loss: spatial mismatch (" + xv.shape_str() +
                      ") vs (" + image.shape_str() + ")");
  Tensor<T> lap_i = laplacian(image);
  Tensor<T> weight(image.n, 1, image.h, image.w);
  for (int b = 0; b < image.n; ++b)
    for (int y = 0; y < image.h; ++y)
      for (int x = 0; x < image.w; ++x) {
        T d = 0;
        for (int ch = 0; ch < image.c; ++ch)
          d += std::abs(lap_i.at(b, ch, y, x));
        weight.at(b, 0, y, x) = std::exp(-gamma * d / image.c);
      }
  Tape<T>& t = *X.tape;
  Ref<T> term = mul(channel_mean(abs_(laplacian(X))), t.constant(std::move(weight)));
  return mul_scalar(sum_all(term), T(1) / T(size_t(image.n) * image.h * image.w));
}

template <typename T>
Ref<T> depth_smoothness_loss(Ref<T> D, const Tensor<T>& I, T gamma) {
  return smoothness_loss(D, I, gamma);
}

template <typename T>
Ref<T> flow_smoothness_loss(Ref<T> R, const Tensor<T>& I, T gamma) {
  return smoothness_loss(R, I, gamma);
}

/// (1/N) sum [ beta (1 - SSIM)/2 + (1-beta) |I - I_warped| ], channel means.
template <typename T>
Ref<T> photometric_loss(Ref<T> I, Ref<T> I_warped, T beta) {
  require_same_shape(I.val(), I_warped.val(), "photometric_loss");
  Ref<T> ssim_term =
      mul_scalar(add_scalar(neg(channel_mean(ssim(I, I_warped))), T(1)),
                 beta / T(2));
  Ref<T> l1_term =
      mul_scalar(channel_mean(abs_(sub(I, I_warped))), T(1) - beta);
  return mean_all(add(ssim_term, l1_term));
}

template <typename T>
struct WindowLoss {
  Ref<T> total;
  std::map<std::string, double> terms;  // per-term values for logging
};

/// L = L_SI + lambda_d L_DS + lambda sum_i (L_PH_i + lambda_o L_OS_i),
/// averaged over the frames of a window; frame 0 contributes depth terms only.
template <typename T>
WindowLoss<T> total_loss(Tape<T>& tape, const std::vector<StepOutput<T>>& steps,
                         const std::vector<Tensor<T>>& frames,
                         const std::vector<Tensor<T>>& depths_gt,
                         const LossConfig& cfg) {
  cfg.validate();
  if (steps.empty()) throw shape_error("total_loss: empty window");
  if (frames.size() != steps.size() || depths_gt.size() != steps.size())
    throw shape_error("total_loss: frames/ground truth count mismatch");
  WindowLoss<T> out;
  Ref<T> acc{};
  auto add_term = [&](Ref<T> term, const std::string& key, double w) {
    if (!std::isfinite(term.val().data[0]))
      throw numeric_error("total_loss: non-finite term " + key);
    out.terms[key] += static_cast<double>(term.val().data[0]);
    Ref<T> weighted = w == 1.0 ? term : mul_scalar(term, T(w));
    acc = acc.valid() ? add(acc, weighted) : weighted;
  };
  for (size_t t = 0; t < steps.size(); ++t) {
    const StepOutput<T>& s = steps[t];
    add_term(scale_invariant_loss(s.depth, depths_gt[t], T(cfg.alpha)), "L_SI",
             1.0);
    add_term(depth_smoothness_loss(s.depth, frames[t], T(cfg.gamma)), "L_DS",
             cfg.lambda_d);
    if (t == 0) continue;
    Ref<T> r[3] = {s.r1, s.r2, s.r3};
    Ref<T> cur = tape.constant(frames[t]);
    Ref<T> prev = tape.constant(frames[t - 1]);
    for (int i = 0; i < 3; ++i) {
      if (i > 0) {
        cur = downsample2x(cur);
        prev = downsample2x(prev);
      }
      Ref<T> warped = bilinear_warp(prev, r[i]);
      const std::string si = std::to_string(i + 1);
      add_term(photometric_loss(cur, warped, T(cfg.beta)), "L_PH" + si,
               cfg.lambda);
      add_term(flow_smoothness_loss(r[i], cur.val(), T(cfg.gamma)),
               "L_OS" + si, cfg.lambda * cfg.lambda_o);
    }
  }
  out.total = mul_scalar(acc, T(1) / T(steps.size()));
  for (auto& [k, v] : out.terms) v /= static_cast<double>(steps.size());
  out.terms["total"] = static_cast<double>(out.total.val().data[0]);
  return out;
}

}  // namespace fgd
