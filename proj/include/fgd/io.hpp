#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fgd/network.hpp"
#include "fgd/params.hpp"
#include "fgd/tensor.hpp"

namespace fgd {

// ---------------------------------------------------------------- PFM
// Grayscale "Pf", scale -1.0 (little-endian), rows stored bottom-up.

template <typename T>
void write_pfm(const std::string& path, const Tensor<T>& img) {
  if (img.n != 1 || img.c != 1) throw io_error("write_pfm: expected (1,1,H,W)");
  for (size_t i = 0; i < img.size(); ++i)
    if (std::isnan(double(img.data[i]))) throw io_error("write_pfm: NaN value");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_pfm: cannot open " + path);
  f << "Pf\n" << img.w << " " << img.h << "\n-1.0\n";
  std::vector<float> row(img.w);
  for (int y = img.h - 1; y >= 0; --y) {
    const T* src = img.row(0, 0, y);
    for (int x = 0; x < img.w; ++x) row[x] = static_cast<float>(src[x]);
    f.write(reinterpret_cast<const char*>(row.data()), sizeof(float) * img.w);
  }
  if (!f) throw io_error("write_pfm: write failed for " + path);
}

template <typename T = float>
Tensor<T> read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("read_pfm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "Pf") throw io_error("read_pfm: bad magic in " + path);
  int w = 0, h = 0;
  double scale = 0;
  f >> w >> h >> scale;
  if (!f || w <= 0 || h <= 0) throw io_error("read_pfm: bad header in " + path);
  if (scale >= 0) throw io_error("read_pfm: big-endian PFM unsupported");
  f.get();  // single whitespace after the scale field
  Tensor<T> img(1, 1, h, w);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()), sizeof(float) * w);
    if (!f) throw io_error("read_pfm: truncated payload in " + path);
    T* dst = img.row(0, 0, y);
    for (int x = 0; x < w; ++x) {
      if (std::isnan(row[x])) throw io_error("read_pfm: NaN value in " + path);
      dst[x] = static_cast<T>(row[x]);
    }
  }
  return img;
}

// --------------------------------------------------------------- .flo
// Middlebury layout: float sentinel 202021.25, int32 width, int32 height,
// then h*w interleaved (dx, dy) float32 pairs, row-major from the top.

inline constexpr float kFloSentinel = 202021.25f;

template <typename T>
void write_flo(const std::string& path, const Tensor<T>& flow) {
  if (flow.n != 1 || flow.c != 2) throw io_error("write_flo: expected (1,2,H,W)");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_flo: cannot open " + path);
  const float sentinel = kFloSentinel;
  const int32_t w = flow.w, h = flow.h;
  f.write(reinterpret_cast<const char*>(&sentinel), 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(&h), 4);
  for (int y = 0; y < flow.h; ++y)
    for (int x = 0; x < flow.w; ++x) {
      const float pair[2] = {static_cast<float>(flow.at(0, 0, y, x)),
                             static_cast<float>(flow.at(0, 1, y, x))};
      f.write(reinterpret_cast<const char*>(pair), 8);
    }
  if (!f) throw io_error("write_flo: write failed for " + path);
}

template <typename T = float>
Tensor<T> read_flo(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("read_flo: cannot open " + path);
  float sentinel = 0;
  int32_t w = 0, h = 0;
  f.read(reinterpret_cast<char*>(&sentinel), 4);
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  if (!f || sentinel != kFloSentinel)
    throw io_error("read_flo: bad sentinel in " + path);
  if (w <= 0 || h <= 0) throw io_error("read_flo: bad size in " + path);
  Tensor<T> flow(1, 2, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float pair[2];
      f.read(reinterpret_cast<char*>(pair), 8);
      if (!f) throw io_error("read_flo: truncated payload in " + path);
      flow.at(0, 0, y, x) = static_cast<T>(pair[0]);
      flow.at(0, 1, y, x) = static_cast<T>(pair[1]);
    }
  return flow;
}

// ---------------------------------------------------------------- PPM
// Binary P6, maxval 255, values mapped to [0,1] by /255 and round(v*255).

template <typename T>
void write_ppm(const std::string& path, const Tensor<T>& img) {
  if (img.n != 1 || img.c != 3) throw io_error("write_ppm: expected (1,3,H,W)");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_ppm: cannot open " + path);
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(double(img.at(0, ch, y, x)), 0.0, 1.0);
        const unsigned char b =
            static_cast<unsigned char>(std::lround(v * 255.0));
        f.write(reinterpret_cast<const char*>(&b), 1);
      }
  if (!f) throw io_error("write_ppm: write failed for " + path);
}

template <typename T = float>
Tensor<T> read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("read_ppm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw io_error("read_ppm: not a P6 file: " + path);
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0) throw io_error("read_ppm: bad header in " + path);
  if (maxval != 255) throw io_error("read_ppm: maxval must be 255 in " + path);
  f.get();
  Tensor<T> img(1, 3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        unsigned char b;
        f.read(reinterpret_cast<char*>(&b), 1);
        if (!f) throw io_error("read_ppm: truncated payload in " + path);
        img.at(0, ch, y, x) = static_cast<T>(b / T(255));
      }
  return img;
}

// ---------------------------------------------------------- checkpoint
// Little-endian container: magic, version, scalar width, ModelConfig,
// training step, five named parameter groups, five Adam states.

inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'F', 'G', 'D', 'C', 'K', 'P', 'T', 0};

template <typename T>
struct Checkpoint {
  ModelConfig config;
  long step = 0;
  ModelParams<T> params;
  std::map<std::string, AdamState<T>> optimizer;  // keyed by group name
};

namespace detail {

template <typename V>
void put(std::ostream& f, const V& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& f) {
  V v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!f) throw io_error("checkpoint: truncated file");
  return v;
}

inline void put_string(std::ostream& f, const std::string& s) {
  put(f, static_cast<uint32_t>(s.size()));
  f.write(s.data(), s.size());
}

inline std::string get_string(std::istream& f) {
  const uint32_t len = get<uint32_t>(f);
  std::string s(len, '\0');
  f.read(s.data(), len);
  if (!f) throw io_error("checkpoint: truncated string");
  return s;
}

template <typename T>
void put_tensor(std::ostream& f, const Tensor<T>& t) {
  put(f, static_cast<int32_t>(t.n));
  put(f, static_cast<int32_t>(t.c));
  put(f, static_cast<int32_t>(t.h));
  put(f, static_cast<int32_t>(t.w));
  f.write(reinterpret_cast<const char*>(t.data.data()), sizeof(T) * t.size());
}

template <typename T>
Tensor<T> get_tensor(std::istream& f) {
  const int32_t n = get<int32_t>(f), c = get<int32_t>(f);
  const int32_t h = get<int32_t>(f), w = get<int32_t>(f);
  if (n < 0 || c < 0 || h < 0 || w < 0)
    throw io_error("checkpoint: bad tensor shape");
  Tensor<T> t;
  if (n * c * h * w != 0) t = Tensor<T>(n, c, h, w);
  t.n = n; t.c = c; t.h = h; t.w = w;
  t.data.resize(size_t(n) * c * h * w);
  f.read(reinterpret_cast<char*>(t.data.data()), sizeof(T) * t.data.size());
  if (!f) throw io_error("checkpoint: truncated tensor payload");
  return t;
}

template <typename T>
void put_param_set(std::ostream& f, const ParamSet<T>& ps) {
  put(f, static_cast<uint32_t>(ps.size()));
  for (const auto& [name, entry] : ps) {
    put_string(f, name);
    put_tensor(f, entry.weight);
    put_tensor(f, entry.bias);
  }
}

template <typename T>
ParamSet<T> get_param_set(std::istream& f) {
  ParamSet<T> ps;
  const uint32_t count = get<uint32_t>(f);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(f);
    ParamEntry<T> e;
    e.weight = get_tensor<T>(f);
    e.bias = get_tensor<T>(f);
    ps.emplace(name, std::move(e));
  }
  return ps;
}

template <typename T>
void put_adam(std::ostream& f, const AdamState<T>& a) {
  put(f, static_cast<int64_t>(a.step));
  put(f, a.lr);
  put(f, a.beta1);
  put(f, a.beta2);
  put(f, a.eps);
  put(f, static_cast<uint32_t>(a.moments.size()));
  for (const auto& [name, m] : a.moments) {
    put_string(f, name);
    put_tensor(f, m.m_w);
    put_tensor(f, m.v_w);
    put_tensor(f, m.m_b);
    put_tensor(f, m.v_b);
  }
}

template <typename T>
AdamState<T> get_adam(std::istream& f) {
  AdamState<T> a;
  a.step = static_cast<long>(get<int64_t>(f));
  a.lr = get<T>(f);
  a.beta1 = get<T>(f);
  a.beta2 = get<T>(f);
  a.eps = get<T>(f);
  const uint32_t count = get<uint32_t>(f);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(f);
    typename AdamState<T>::Moments m;
    m.m_w = get_tensor<T>(f);
    m.v_w = get_tensor<T>(f);
    m.m_b = get_tensor<T>(f);
    m.v_b = get_tensor<T>(f);
    a.moments.emplace(name, std::move(m));
  }
  return a;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ck) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("save_checkpoint: cannot open " + path);
  f.write(kCheckpointMagic, 8);
  detail::put(f, kCheckpointVersion);
  detail::put(f, static_cast<uint32_t>(sizeof(T)));
  detail::put(f, static_cast<int32_t>(ck.config.channel_scale));
  detail::put(f, static_cast<int32_t>(ck.config.height));
  detail::put(f, static_cast<int32_t>(ck.config.width));
  detail::put(f, static_cast<double>(ck.config.confidence_eps));
  detail::put(f, static_cast<int64_t>(ck.step));
  const std::pair<std::string, const ParamSet<T>*> groups[] = {
      {"spatial", &ck.params.spatial},       {"temporal", &ck.params.temporal},
      {"memory", &ck.params.memory},         {"decoder", &ck.params.decoder},
      {"flow_refine", &ck.params.flow_refine}};
  for (const auto& [name, ps] : groups) {
    detail::put_string(f, name);
    detail::put_param_set(f, *ps);
  }
  detail::put(f, static_cast<uint32_t>(ck.optimizer.size()));
  for (const auto& [name, adam] : ck.optimizer) {
    detail::put_string(f, name);
    detail::put_adam(f, adam);
  }
  if (!f) throw io_error("save_checkpoint: write failed for " + path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw io_error("load_checkpoint: bad magic in " + path);
  const uint32_t version = detail::get<uint32_t>(f);
  if (version != kCheckpointVersion)
    throw io_error("load_checkpoint: unsupported version " +
                   std::to_string(version));
  const uint32_t scalar = detail::get<uint32_t>(f);
  if (scalar != sizeof(T))
    throw io_error("load_checkpoint: scalar width mismatch");
  Checkpoint<T> ck;
  ck.config.channel_scale = detail::get<int32_t>(f);
  ck.config.height = detail::get<int32_t>(f);
  ck.config.width = detail::get<int32_t>(f);
  ck.config.confidence_eps = detail::get<double>(f);
  ck.step = static_cast<long>(detail::get<int64_t>(f));
  std::map<std::string, ParamSet<T>*> groups = {
      {"spatial", &ck.params.spatial},       {"temporal", &ck.params.temporal},
      {"memory", &ck.params.memory},         {"decoder", &ck.params.decoder},
      {"flow_refine", &ck.params.flow_refine}};
  for (size_t i = 0; i < groups.size(); ++i) {
    const std::string name = detail::get_string(f);
    auto it = groups.find(name);
    if (it == groups.end())
      throw io_error("load_checkpoint: unknown group " + name);
    *it->second = detail::get_param_set<T>(f);
  }
  const uint32_t opt_count = detail::get<uint32_t>(f);
  for (uint32_t i = 0; i < opt_count; ++i) {
    const std::string name = detail::get_string(f);
    ck.optimizer.emplace(name, detail::get_adam<T>(f));
  }
  return ck;
}

// --------------------------------------------------------- run config
// Line-oriented "key = value" files; '#' starts a comment.

inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r\n";
    const size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(ws) - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw io_error("config: missing '=' on line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw io_error("config: empty key on line " + std::to_string(lineno));
    kv[key] = val;
  }
  return kv;
}

inline std::map<std::string, std::string> parse_config_file(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("config: cannot open " + path);
  return parse_config(f);
}

// ------------------------------------------------- depth visualization
// Fixed perceptual ramp over log-depth within [lo, hi]; presentation only.

template <typename T>
Tensor<T> colorize_depth(const Tensor<T>& depth, double lo, double hi) {
  if (depth.n != 1 || depth.c != 1)
    throw io_error("colorize_depth: expected (1,1,H,W)");
  lo = std::max(lo, 1e-6);
  hi = std::max(hi, lo * (1 + 1e-9));
  static const double ramp[][3] = {
      {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
      {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
      {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.478, 0.821, 0.318},
      {0.741, 0.873, 0.150}, {0.993, 0.906, 0.144}};
  constexpr int n_stops = 11;
  Tensor<T> out(1, 3, depth.h, depth.w);
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  for (int y = 0; y < depth.h; ++y)
    for (int x = 0; x < depth.w; ++x) {
      const double d = std::clamp(double(depth.at(0, 0, y, x)), lo, hi);
      const double s = (std::log(d) - log_lo) / (log_hi - log_lo);
      const double pos = s * (n_stops - 1);
      const int i = std::min(static_cast<int>(pos), n_stops - 2);
      const double frac = pos - i;
      for (int ch = 0; ch < 3; ++ch)
        out.at(0, ch, y, x) = static_cast<T>((1 - frac) * ramp[i][ch] +
                                             frac * ramp[i + 1][ch]);
    }
  return out;
}

}  // namespace fgd
