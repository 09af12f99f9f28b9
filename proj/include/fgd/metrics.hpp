#pragma once

#include <limits>
#include <vector>

#include "fgd/image_ops.hpp"
#include "fgd/tensor.hpp"

namespace fgd {

struct MetricConfig {
  double cap_min = 0.0;   // evaluate where cap_min < G <= cap_max
  double cap_max = 80.0;
  double tdt_eps1 = 0.5;
  double tdt_th = 0.05;
  // The confidence constants bite on an 8-bit intensity scale; images stored
  // in [0,1] are multiplied by this before the L1 difference.
  double tdt_intensity_scale = 255.0;
  // Normalize TDT by the confident-pixel count (true) or all pixels (false).
  bool tdt_confident_norm = true;

  void validate() const {
    if (cap_min >= cap_max) throw numeric_error("MetricConfig: cap_min >= cap_max");
    if (tdt_th <= 0 || tdt_th >= 1) throw numeric_error("MetricConfig: th must be in (0,1)");
  }
};

struct MetricReport {
  double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0;
  double delta1 = 0, delta2 = 0, delta3 = 0;
  double tdt = std::numeric_limits<double>::quiet_NaN();
  double tdt_lt1 = 0, tdt_lt2 = 0, tdt_lt3 = 0;
  long valid_pixels = 0;
  long tdt_confident = 0;
};

namespace detail {

inline double median(std::vector<double>& v) {
  const size_t n = v.size();
  const size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

}  // namespace detail

/// Rescales D so its median over valid (G > 0) pixels matches G's.
template <typename T>
Tensor<T> median_scale(const Tensor<T>& D, const Tensor<T>& G) {
  require_same_shape(D, G, "median_scale");
  std::vector<double> dv, gv;
  for (size_t i = 0; i < G.size(); ++i)
    if (G.data[i] > T(0)) {
      dv.push_back(static_cast<double>(D.data[i]));
      gv.push_back(static_cast<double>(G.data[i]));
    }
  if (dv.empty()) throw numeric_error("median_scale: no valid pixels");
  const double med_d = detail::median(dv);
  if (med_d == 0) throw numeric_error("median_scale: predicted median is zero");
  const double scale = detail::median(gv) / med_d;
  Tensor<T> out = D;
  for (T& v : out.data) v = static_cast<T>(v * scale);
  return out;
}

/// Standard depth error suite over pixels with cap_min < G <= cap_max;
/// D is clamped into the cap range first. delta thresholds are strict (<).
template <typename T>
MetricReport depth_metrics(const Tensor<T>& D, const Tensor<T>& G,
                           const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(D, G, "depth_metrics");
  MetricReport r;
  double se = 0, se_log = 0;
  for (size_t i = 0; i < G.size(); ++i) {
    const double g = static_cast<double>(G.data[i]);
    if (!(g > cfg.cap_min && g <= cfg.cap_max)) continue;
    double d = std::clamp(static_cast<double>(D.data[i]),
                          std::max(cfg.cap_min, 1e-6), cfg.cap_max);
    const double diff = d - g;
    r.abs_rel += std::abs(diff) / g;
    r.sq_rel += diff * diff / g;
    se += diff * diff;
    const double dl = std::log(d) - std::log(g);
    se_log += dl * dl;
    const double ratio = std::max(d / g, g / d);
    if (ratio < 1.25) ++r.delta1;
    if (ratio < 1.25 * 1.25) ++r.delta2;
    if (ratio < 1.25 * 1.25 * 1.25) ++r.delta3;
    ++r.valid_pixels;
  }
  if (r.valid_pixels == 0)
    throw numeric_error("depth_metrics: no pixels inside the cap range");
  const double n = static_cast<double>(r.valid_pixels);
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(se / n);
  r.rmse_log = std::sqrt(se_log / n);
  r.delta1 /= n;
  r.delta2 /= n;
  r.delta3 /= n;
  return r;
}

struct TdtResult {
  long confident = 0;  // 0 means no valid trajectory
  double tdt = std::numeric_limits<double>::quiet_NaN();
  double lt1 = 0, lt2 = 0, lt3 = 0;
  Tensor<double> map;  // confidence-masked |D_t - warped D_prev|

  bool valid() const { return confident > 0; }
};

/// Temporal differences along trajectories: warp the previous depth along the
/// evaluation flow, mask by binary photometric confidence, average the
/// absolute change. lt{1,2,3} are fractions of confident pixels with a
/// difference strictly below 1, 2, 3 depth units.
template <typename T>
TdtResult tdt(const Tensor<T>& D_t, const Tensor<T>& D_prev,
              const Tensor<T>& flow_eval, const Tensor<T>& I_t,
              const Tensor<T>& I_prev, const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(D_t, D_prev, "tdt");
  require_same_shape(I_t, I_prev, "tdt");
  if (I_t.h != D_t.h || I_t.w != D_t.w)
    throw shape_error("tdt: image/depth spatial mismatch");
  Tensor<T> d_warp = warp_bilinear(D_prev, flow_eval);
  Tensor<T> i_warp = warp_bilinear(I_prev, flow_eval);
  TdtResult r;
  r.map = Tensor<double>(D_t.n, 1, D_t.h, D_t.w);
  double sum = 0;
  long all = 0;
  for (int b = 0; b < D_t.n; ++b)
    for (int y = 0; y < D_t.h; ++y)
      for (int x = 0; x < D_t.w; ++x) {
        ++all;
        double l1 = 0;
        for (int ch = 0; ch < I_t.c; ++ch)
          l1 += std::abs(static_cast<double>(I_t.at(b, ch, y, x)) -
                         static_cast<double>(i_warp.at(b, ch, y, x)));
        l1 = l1 / I_t.c * cfg.tdt_intensity_scale;
        if (!(std::exp(-cfg.tdt_eps1 * l1) > cfg.tdt_th)) continue;
        const double diff = std::abs(static_cast<double>(D_t.at(b, 0, y, x)) -
                                     static_cast<double>(d_warp.at(b, 0, y, x)));
        r.map.at(b, 0, y, x) = diff;
        sum += diff;
        ++r.confident;
        if (diff < 1) ++r.lt1;
        if (diff < 2) ++r.lt2;
        if (diff < 3) ++r.lt3;
      }
  if (r.confident == 0) return r;  // explicit no-valid-trajectory result
  const double n =
      cfg.tdt_confident_norm ? static_cast<double>(r.confident) : static_cast<double>(all);
  r.tdt = sum / n;
  r.lt1 /= static_cast<double>(r.confident);
  r.lt2 /= static_cast<double>(r.confident);
  r.lt3 /= static_cast<double>(r.confident);
  return r;
}

}  // namespace fgd
