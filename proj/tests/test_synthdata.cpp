#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fgd/image_ops.hpp"
#include "fgd/metrics.hpp"
#include "fgd/synthdata.hpp"

using namespace fgd;

namespace {

SceneConfig small_scene() {
  SceneConfig cfg;
  cfg.height = 48;
  cfg.width = 96;
  cfg.sprite_count = 3;
  cfg.sprite_size = 16;
  cfg.frames = 5;
  return cfg;
}

}  // namespace

TEST_CASE("static camera: zero flow, identical frames") {
  SceneConfig cfg = small_scene();
  cfg.t_x = 0.0;
  auto s = generate_sequence<double>(cfg, 3);
  for (const auto& f : s.flows_gt)
    for (double v : f.data) CHECK(v == 0.0);
  for (size_t t = 1; t < s.frames.size(); ++t) {
    REQUIRE(s.frames[t].data.size() == s.frames[0].data.size());
    for (size_t i = 0; i < s.frames[t].data.size(); ++i)
      CHECK(s.frames[t].data[i] == s.frames[0].data[i]);
  }
  // the conservative mask may still drop sprite-boundary pixels whose
  // bilinear support straddles two layers, but nearly everything is valid
  for (const auto& m : s.masks) {
    long valid = 0;
    for (double v : m.data) valid += v == 1.0;
    CHECK(valid >= long(m.data.size() * 9) / 10);
  }
}

TEST_CASE("parallax law: |flow_x| * Z = f * |T_x| at valid pixels") {
  SceneConfig cfg = small_scene();
  auto s = generate_sequence<double>(cfg, 11);
  const double fx_tx = cfg.focal * std::abs(cfg.t_x);
  long checked = 0;
  for (size_t t = 0; t < s.flows_gt.size(); ++t) {
    const auto& flow = s.flows_gt[t];
    const auto& depth = s.depths[t + 1];
    const auto& mask = s.masks[t];
    for (int y = 0; y < flow.h; ++y)
      for (int x = 0; x < flow.w; ++x) {
        if (mask.at(0, 0, y, x) != 1.0) continue;
        const double u = std::abs(flow.at(0, 0, y, x));
        const double z = depth.at(0, 0, y, x);
        CHECK(std::abs(u * z - fx_tx) <= 1e-6 * fx_tx);
        CHECK(flow.at(0, 1, y, x) == 0.0);  // lateral motion only
        ++checked;
      }
  }
  CHECK(checked > 1000);
}

TEST_CASE("nearer layers move faster: u = f * T_x / Z") {
  // f = 100, T_x = 0.5: Z = 10 gives 5 px/frame, Z = 50 gives 1 px/frame
  SceneConfig cfg;
  cfg.focal = 100.0;
  cfg.t_x = 0.5;
  CHECK(cfg.focal * cfg.t_x / 10.0 == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(cfg.focal * cfg.t_x / 50.0 == doctest::Approx(1.0).epsilon(1e-12));

  // realized in a generated sample: sprite pixels (nearer) carry larger
  // horizontal flow than background pixels
  cfg = small_scene();
  auto s = generate_sequence<double>(cfg, 4);
  const double u_bg = cfg.focal * cfg.t_x / cfg.z_background;
  bool saw_faster = false;
  const auto& flow = s.flows_gt[0];
  const auto& mask = s.masks[0];
  for (int y = 0; y < flow.h && !saw_faster; ++y)
    for (int x = 0; x < flow.w; ++x)
      if (mask.at(0, 0, y, x) == 1.0 &&
          std::abs(flow.at(0, 0, y, x)) > u_bg * 1.5) {
        saw_faster = true;
        break;
      }
  CHECK(saw_faster);
}

TEST_CASE("photometric self-consistency: warp(I_{t-1}, flow) matches I_t") {
  SceneConfig cfg = small_scene();
  auto s = generate_sequence<double>(cfg, 21);
  for (size_t t = 1; t < s.frames.size(); ++t) {
    Tensor<double> warped = warp_bilinear(s.frames[t - 1], s.flows_gt[t - 1]);
    const auto& mask = s.masks[t - 1];
    double err = 0;
    long count = 0;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < warped.h; ++y)
        for (int x = 0; x < warped.w; ++x)
          if (mask.at(0, 0, y, x) == 1.0) {
            err += std::abs(warped.at(0, c, y, x) - s.frames[t].at(0, c, y, x));
            ++count;
          }
    REQUIRE(count > 0);
    CHECK(err / count <= 0.02);
  }
}

TEST_CASE("ground-truth depth has zero temporal difference along flow") {
  SceneConfig cfg = small_scene();
  auto s = generate_sequence<double>(cfg, 35);
  MetricConfig mcfg;
  for (size_t t = 1; t < s.depths.size(); ++t) {
    TdtResult r = tdt(s.depths[t], s.depths[t - 1], s.flows_gt[t - 1],
                      s.frames[t], s.frames[t - 1], mcfg);
    REQUIRE(r.valid());
    // confident pixels may include bilinear-blend edges; restrict to the
    // exact validity mask where the difference must vanish
    const auto& mask = s.masks[t - 1];
    for (int y = 0; y < mask.h; ++y)
      for (int x = 0; x < mask.w; ++x)
        if (mask.at(0, 0, y, x) == 1.0)
          CHECK(r.map.at(0, 0, y, x) <= 1e-9);
  }
}

TEST_CASE("frames stay inside the normalized texture range") {
  auto s = generate_sequence<double>(small_scene(), 8);
  for (const auto& f : s.frames)
    for (double v : f.data) {
      CHECK(v >= 0.1 - 1e-12);
      CHECK(v <= 0.9 + 1e-12);
    }
}

TEST_CASE("determinism: same seed gives bit-identical samples") {
  SceneConfig cfg = small_scene();
  cfg.flow_noise = 0.3;
  auto a = generate_sequence<double>(cfg, 77);
  auto b = generate_sequence<double>(cfg, 77);
  auto check_lists = [](const std::vector<Tensor<double>>& u,
                        const std::vector<Tensor<double>>& v) {
    REQUIRE(u.size() == v.size());
    for (size_t i = 0; i < u.size(); ++i) {
      REQUIRE(u[i].data.size() == v[i].data.size());
      for (size_t j = 0; j < u[i].data.size(); ++j)
        CHECK(u[i].data[j] == v[i].data[j]);
    }
  };
  check_lists(a.frames, b.frames);
  check_lists(a.depths, b.depths);
  check_lists(a.flows_gt, b.flows_gt);
  check_lists(a.flows_input, b.flows_input);
  check_lists(a.masks, b.masks);

  auto c = generate_sequence<double>(cfg, 78);
  bool differs = false;
  for (size_t j = 0; j < a.frames[0].data.size() && !differs; ++j)
    differs = a.frames[0].data[j] != c.frames[0].data[j];
  CHECK(differs);
}

TEST_CASE("occlusion masking: sprites over background invalidate pixels") {
  SceneConfig cfg = small_scene();
  auto s = generate_sequence<double>(cfg, 5);
  for (const auto& m : s.masks) {
    long invalid = 0;
    for (double v : m.data) {
      CHECK((v == 0.0 || v == 1.0));
      invalid += v == 0.0;
    }
    // moving sprites always cover and uncover background somewhere
    CHECK(invalid > 0);
    CHECK(invalid < long(m.data.size()));
  }
}

TEST_CASE("input flow: clean when noise is off, perturbed when on") {
  SceneConfig cfg = small_scene();
  auto clean = generate_sequence<double>(cfg, 9);
  for (size_t i = 0; i < clean.flows_gt.size(); ++i)
    for (size_t j = 0; j < clean.flows_gt[i].data.size(); ++j)
      CHECK(clean.flows_input[i].data[j] == clean.flows_gt[i].data[j]);

  cfg.flow_noise = 0.5;
  auto noisy = generate_sequence<double>(cfg, 9);
  double sq = 0;
  long n = 0;
  for (size_t i = 0; i < noisy.flows_gt.size(); ++i)
    for (size_t j = 0; j < noisy.flows_gt[i].data.size(); ++j) {
      const double d = noisy.flows_input[i].data[j] - noisy.flows_gt[i].data[j];
      sq += d * d;
      ++n;
    }
  CHECK(std::sqrt(sq / n) == doctest::Approx(0.5).epsilon(0.10));
}

TEST_CASE("perturb_flow: identity at zero amplitude, exact RMS otherwise") {
  std::mt19937_64 rng(13);
  Tensor<double> flow(1, 2, 128, 128);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (double& v : flow.data) v = dist(rng);

  Tensor<double> same = perturb_flow(flow, 0.0, 99);
  for (size_t i = 0; i < flow.data.size(); ++i)
    CHECK(same.data[i] == flow.data[i]);

  Tensor<double> pert = perturb_flow(flow, 0.75, 99);
  double sq = 0;
  for (size_t i = 0; i < flow.data.size(); ++i) {
    const double d = pert.data[i] - flow.data[i];
    sq += d * d;
  }
  CHECK(std::sqrt(sq / flow.data.size()) ==
        doctest::Approx(0.75).epsilon(0.10));

  Tensor<double> again = perturb_flow(flow, 0.75, 99);
  for (size_t i = 0; i < pert.data.size(); ++i)
    CHECK(again.data[i] == pert.data[i]);

  Tensor<double> other = perturb_flow(flow, 0.75, 100);
  bool differs = false;
  for (size_t i = 0; i < pert.data.size() && !differs; ++i)
    differs = other.data[i] != pert.data[i];
  CHECK(differs);

  CHECK_THROWS_AS(perturb_flow(flow, -1.0, 0), const numeric_error&);
}

TEST_CASE("config validation") {
  SceneConfig cfg = small_scene();
  cfg.frames = 1;
  CHECK_THROWS_AS(generate_sequence<double>(cfg, 0), const shape_error&);

  cfg = small_scene();
  cfg.sprite_size = 200;
  CHECK_THROWS_AS(generate_sequence<double>(cfg, 0), const shape_error&);

  cfg = small_scene();
  cfg.z_min = 0.0;
  CHECK_THROWS_AS(generate_sequence<double>(cfg, 0), const shape_error&);

  cfg = small_scene();
  cfg.z_max = cfg.z_background + 1.0;
  CHECK_THROWS_AS(generate_sequence<double>(cfg, 0), const shape_error&);
}

TEST_CASE("sample shapes and lengths are consistent") {
  SceneConfig cfg = small_scene();
  auto s = generate_sequence<float>(cfg, 2);
  REQUIRE(s.frames.size() == size_t(cfg.frames));
  REQUIRE(s.depths.size() == size_t(cfg.frames));
  REQUIRE(s.flows_gt.size() == size_t(cfg.frames - 1));
  REQUIRE(s.flows_input.size() == size_t(cfg.frames - 1));
  REQUIRE(s.masks.size() == size_t(cfg.frames - 1));
  for (const auto& f : s.frames) {
    CHECK(f.n == 1);
    CHECK(f.c == 3);
    CHECK(f.h == cfg.height);
    CHECK(f.w == cfg.width);
  }
  for (const auto& d : s.depths) {
    CHECK(d.c == 1);
    for (float v : d.data) {
      CHECK(v >= float(cfg.z_min));
      CHECK(v <= float(cfg.z_background));
    }
  }
  for (const auto& fl : s.flows_gt) CHECK(fl.c == 2);
}
