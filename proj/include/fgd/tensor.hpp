#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgd {

struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense rank-4 array in NCHW row-major order.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_) {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw shape_error("tensor dims must be >= 1, got (" + shape_str() + ")");
    data.assign(static_cast<size_t>(n) * c * h * w, fill);
  }

  size_t size() const { return data.size(); }

  T& at(int b, int ch, int y, int x) {
    return data[((static_cast<size_t>(b) * c + ch) * h + y) * w + x];
  }
  T at(int b, int ch, int y, int x) const {
    return data[((static_cast<size_t>(b) * c + ch) * h + y) * w + x];
  }
  T* row(int b, int ch, int y) {
    return data.data() + ((static_cast<size_t>(b) * c + ch) * h + y) * w;
  }
  const T* row(int b, int ch, int y) const {
    return data.data() + ((static_cast<size_t>(b) * c + ch) * h + y) * w;
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  std::string shape_str() const {
    return std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n, c, h, w);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
void ensure_finite(const Tensor<T>& t, const std::string& op) {
  for (T v : t.data)
    if (!std::isfinite(v))
      throw numeric_error("non-finite value produced by " + op);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const std::string& op) {
  if (!a.same_shape(b))
    throw shape_error(op + ": shape mismatch (" + a.shape_str() + ") vs (" +
                      b.shape_str() + ")");
}

/// Uniform fill in [-s, s], s = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_fill(Tensor<T>& t, int fan_in, int fan_out, std::mt19937_64& rng) {
  double s = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  for (T& v : t.data) v = static_cast<T>(dist(rng));
}

template <typename T>
Tensor<T> random_uniform(int n, int c, int h, int w, double lo, double hi,
                         std::mt19937_64& rng) {
  Tensor<T> t(n, c, h, w);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (T& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace fgd
