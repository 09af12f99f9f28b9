#pragma once

#include <random>
#include <vector>

#include "fgd/tensor.hpp"

namespace fgd {

/// Layered scene under pure lateral camera translation: a layer at depth Z
/// moves f * T_x / Z pixels per frame, so nearer layers move faster.
struct SceneConfig {
  int height = 64;
  int width = 192;
  double focal = 100.0;       // pixels
  double z_background = 40.0; // meters
  int sprite_count = 4;
  double z_min = 5.0;
  double z_max = 25.0;
  int sprite_size = 24;       // square, pixels
  double t_x = 0.5;           // camera lateral velocity, meters per frame
  int frames = 8;
  double flow_noise = 0.0;    // RMS amplitude of input-flow perturbation, px

  void validate() const {
    if (frames < 2) throw shape_error("SceneConfig: frames must be >= 2");
    if (!(z_min > 0 && z_min <= z_max && z_max <= z_background))
      throw shape_error("SceneConfig: need 0 < z_min <= z_max <= z_background");
    if (sprite_size > height || sprite_size > width)
      throw shape_error("SceneConfig: sprite larger than frame");
  }
};

template <typename T>
struct SequenceSample {
  std::vector<Tensor<T>> frames;       // (1,3,H,W) in [0,1]
  std::vector<Tensor<T>> depths;       // (1,1,H,W) meters
  std::vector<Tensor<T>> flows_gt;     // (1,2,H,W), backward, frames 1..T-1
  std::vector<Tensor<T>> flows_input;  // ground truth plus optional noise
  std::vector<Tensor<T>> masks;        // (1,1,H,W), 1 where flow supervision holds
};

namespace detail {

// 5x5 mean blur with replicate borders, repeated `passes` times
inline void mean_blur5(std::vector<double>& img, int h, int w, int passes) {
  std::vector<double> tmp(img.size());
  for (int pass = 0; pass < passes; ++pass) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx)
            acc += img[std::clamp(y + dy, 0, h - 1) * w +
                       std::clamp(x + dx, 0, w - 1)];
        tmp[y * w + x] = acc / 25.0;
      }
    img.swap(tmp);
  }
}

struct Layer {
  double z = 0;
  double u = 0;          // pixels of backward displacement per frame
  double x0 = 0, y0 = 0; // image-space anchor at frame 0 (sprites only)
  int sw = 0, sh = 0;    // sprite extent; 0 for the background
  int tex_w = 0, tex_h = 0;
  std::vector<double> tex;  // 3 channels, row-major per channel

  bool is_background() const { return sw == 0; }

  // sprite coverage at continuous image coordinates, frame t
  bool covers(double x, double y, int t) const {
    if (is_background()) return true;
    const double lx = x - (x0 - u * t);
    const double ly = y - y0;
    return lx >= 0 && lx < sw && ly >= 0 && ly < sh;
  }

  double sample(int ch, double x, double y, int t) const {
    // texture coordinate: background anchored at x0 = 0
    double tx = x + u * t - (is_background() ? 0.0 : x0);
    double ty = y - (is_background() ? 0.0 : y0);
    tx = std::clamp(tx, 0.0, double(tex_w - 1));
    ty = std::clamp(ty, 0.0, double(tex_h - 1));
    const int x0i = std::min(int(tx), tex_w - 1), y0i = std::min(int(ty), tex_h - 1);
    const int x1i = std::min(x0i + 1, tex_w - 1), y1i = std::min(y0i + 1, tex_h - 1);
    const double fx = tx - x0i, fy = ty - y0i;
    const double* c = tex.data() + size_t(ch) * tex_w * tex_h;
    return (1 - fy) * ((1 - fx) * c[y0i * tex_w + x0i] + fx * c[y0i * tex_w + x1i]) +
           fy * ((1 - fx) * c[y1i * tex_w + x0i] + fx * c[y1i * tex_w + x1i]);
  }
};

inline std::vector<double> make_texture(int h, int w, std::mt19937_64& rng) {
  std::vector<double> tex(size_t(3) * h * w);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (double& v : tex) v = dist(rng);
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> plane(tex.begin() + size_t(ch) * h * w,
                              tex.begin() + size_t(ch + 1) * h * w);
    mean_blur5(plane, h, w, 1);
    double lo = plane[0], hi = plane[0];
    for (double v : plane) { lo = std::min(lo, v); hi = std::max(hi, v); }
    const double span = hi > lo ? hi - lo : 1.0;
    for (size_t i = 0; i < plane.size(); ++i)
      tex[size_t(ch) * h * w + i] = 0.1 + 0.8 * (plane[i] - lo) / span;
  }
  return tex;
}

// index of the nearest layer covering (x, y) at frame t; layers sorted near
// to far with the background last
inline int winner(const std::vector<Layer>& layers, double x, double y, int t) {
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].covers(x, y, t)) return static_cast<int>(i);
  return static_cast<int>(layers.size()) - 1;
}

}  // namespace detail

/// Seeded smoothed-noise flow perturbation with exact RMS amplitude.
template <typename T>
Tensor<T> perturb_flow(const Tensor<T>& flow, double amplitude, uint64_t seed) {
  if (amplitude < 0) throw numeric_error("perturb_flow: amplitude must be >= 0");
  if (amplitude == 0) return flow;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<T> out = flow;
  for (int b = 0; b < flow.n; ++b)
    for (int ch = 0; ch < flow.c; ++ch) {
      std::vector<double> noise(size_t(flow.h) * flow.w);
      for (double& v : noise) v = dist(rng);
      detail::mean_blur5(noise, flow.h, flow.w, 2);
      double rms = 0;
      for (double v : noise) rms += v * v;
      rms = std::sqrt(rms / noise.size());
      if (rms == 0) continue;
      const double k = amplitude / rms;
      for (int i = 0; i < flow.h * flow.w; ++i)
        out.row(b, ch, 0)[i] += static_cast<T>(k * noise[i]);
    }
  return out;
}

template <typename T>
SequenceSample<T> generate_sequence(const SceneConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uz(cfg.z_min, cfg.z_max);
  std::uniform_real_distribution<double> ux(0.0, cfg.width - cfg.sprite_size);
  std::uniform_real_distribution<double> uy(0.0, cfg.height - cfg.sprite_size);

  std::vector<detail::Layer> layers;
  for (int i = 0; i < cfg.sprite_count; ++i) {
    detail::Layer l;
    l.z = uz(rng);
    l.u = cfg.focal * cfg.t_x / l.z;
    l.sw = l.sh = cfg.sprite_size;
    l.x0 = ux(rng);
    l.y0 = uy(rng);
    l.tex_h = l.sh;
    l.tex_w = l.sw + static_cast<int>(std::ceil(std::abs(l.u) * cfg.frames)) + 2;
    l.tex = detail::make_texture(l.tex_h, l.tex_w, rng);
    layers.push_back(std::move(l));
  }
  std::sort(layers.begin(), layers.end(),
            [](const detail::Layer& a, const detail::Layer& b) { return a.z < b.z; });
  {
    detail::Layer bg;
    bg.z = cfg.z_background;
    bg.u = cfg.focal * cfg.t_x / bg.z;
    bg.tex_h = cfg.height;
    bg.tex_w = cfg.width +
               static_cast<int>(std::ceil(std::abs(bg.u) * cfg.frames)) + 2;
    bg.tex = detail::make_texture(bg.tex_h, bg.tex_w, rng);
    layers.push_back(std::move(bg));
  }

  SequenceSample<T> s;
  for (int t = 0; t < cfg.frames; ++t) {
    Tensor<T> frame(1, 3, cfg.height, cfg.width);
    Tensor<T> depth(1, 1, cfg.height, cfg.width);
    Tensor<T> flow(1, 2, cfg.height, cfg.width);
    Tensor<T> mask(1, 1, cfg.height, cfg.width);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const int wi = detail::winner(layers, x, y, t);
        const detail::Layer& l = layers[wi];
        for (int ch = 0; ch < 3; ++ch)
          frame.at(0, ch, y, x) = static_cast<T>(l.sample(ch, x, y, t));
        depth.at(0, 0, y, x) = static_cast<T>(l.z);
        if (t == 0) continue;
        flow.at(0, 0, y, x) = static_cast<T>(l.u);
        // flow supervision holds where the bilinear support of the source
        // point lies in the same layer and inside the previous frame
        const double sx = x + l.u;
        bool valid = sx >= 0 && sx <= cfg.width - 1;
        if (valid) {
          const int sx0 = static_cast<int>(std::floor(sx));
          for (int dx = 0; dx <= 1 && valid; ++dx) {
            const double qx = std::min(double(sx0 + dx), double(cfg.width - 1));
            valid = detail::winner(layers, qx, y, t - 1) == wi;
          }
        }
        mask.at(0, 0, y, x) = valid ? T(1) : T(0);
      }
    s.frames.push_back(std::move(frame));
    s.depths.push_back(std::move(depth));
    if (t > 0) {
      s.flows_input.push_back(
          perturb_flow(flow, cfg.flow_noise, seed ^ (0x9e3779b97f4a7c15ULL + t)));
      s.flows_gt.push_back(std::move(flow));
      s.masks.push_back(std::move(mask));
    }
  }
  return s;
}

}  // namespace fgd
