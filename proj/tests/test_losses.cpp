#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fgd/losses.hpp"

using namespace fgd;

namespace {

Tensor<double> rnd(int n, int c, int h, int w, std::mt19937_64& rng,
                   double lo = 0, double hi = 1) {
  Tensor<double> t(n, c, h, w);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data) v = d(rng);
  return t;
}

double si_loss(const Tensor<double>& D, const Tensor<double>& G, double alpha) {
  Tape<double> tape;
  return scale_invariant_loss(tape.constant(D), G, alpha).val().data[0];
}

}  // namespace

TEST_CASE("scale-invariant loss vanishes for a perfect prediction") {
  std::mt19937_64 rng(1);
  Tensor<double> G = rnd(1, 1, 4, 4, rng, 1.0, 20.0);
  G.data[5] = 0;  // invalid pixel ignored
  Tensor<double> D = G;
  D.data[5] = 3.0;  // value at the invalid pixel must not matter
  CHECK(si_loss(D, G, 0.5) == 0.0);
}

TEST_CASE("scale-invariant loss: two-pixel closed form") {
  // s = (log 2, log 2): (1/2)*2*(log2)^2 - (0.5/4)*(2 log2)^2 = 0.5 (log2)^2
  Tensor<double> G(1, 1, 1, 2);
  G.data = {1.0, 3.0};
  Tensor<double> D(1, 1, 1, 2);
  D.data = {2.0, 6.0};
  const double l2 = std::log(2.0);
  CHECK(si_loss(D, G, 0.5) == doctest::Approx(0.5 * l2 * l2).epsilon(1e-12));
  CHECK(si_loss(D, G, 0.5) == doctest::Approx(0.24023).epsilon(1e-4));
}

TEST_CASE("alpha = 1 makes the loss invariant to global rescaling") {
  std::mt19937_64 rng(2);
  Tensor<double> G = rnd(1, 1, 5, 5, rng, 1.0, 30.0);
  Tensor<double> D = rnd(1, 1, 5, 5, rng, 0.5, 20.0);
  const double base = si_loss(D, G, 1.0);
  for (double k : {0.1, 1.0, 10.0}) {
    Tensor<double> kD = D;
    for (auto& v : kD.data) v *= k;
    CHECK(si_loss(kD, G, 1.0) ==
          doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("pair-sum identity matches the brute-force double sum") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + int(rng() % 15);  // lengths up to 16
    std::vector<double> s(n);
    std::uniform_real_distribution<double> d(-2, 2);
    for (auto& v : s) v = d(rng);
    // O(N^2) oracle in double
    double pair = 0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) pair += s[p] * s[q];
    double sum = 0;
    for (double v : s) sum += v;
    CHECK(sum * sum == doctest::Approx(pair).epsilon(1e-9));
    // and through the loss: build D = G * exp(s)
    Tensor<double> G(1, 1, 1, n), D(1, 1, 1, n);
    double sq = 0;
    for (int i = 0; i < n; ++i) {
      G.data[i] = 2.0;
      D.data[i] = 2.0 * std::exp(s[i]);
      sq += s[i] * s[i];
    }
    const double alpha = 0.5;
    const double oracle = sq / n - alpha * pair / (double(n) * n);
    CHECK(si_loss(D, G, alpha) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("scale-invariant loss is non-negative for alpha in [0,1]") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> G = rnd(1, 1, 4, 4, rng, 0.5, 30.0);
    Tensor<double> D = rnd(1, 1, 4, 4, rng, 0.1, 30.0);
    std::uniform_real_distribution<double> ua(0, 1);
    CHECK(si_loss(D, G, ua(rng)) >= 0.0);
  }
}

TEST_CASE("scale-invariant loss error cases") {
  Tensor<double> G(1, 1, 2, 2);  // all invalid
  Tensor<double> D(1, 1, 2, 2);
  for (auto& v : D.data) v = 1;
  Tape<double> tape;
  CHECK_THROWS_AS(scale_invariant_loss(tape.constant(D), G, 0.5), numeric_error);
  G.data[0] = 5.0;
  Tensor<double> bad = D;
  bad.data[0] = -1.0;
  CHECK_THROWS_AS(scale_invariant_loss(tape.constant(bad), G, 0.5), numeric_error);
}

TEST_CASE("depth smoothness of a constant depth map is zero") {
  std::mt19937_64 rng(5);
  Tensor<double> I = rnd(1, 3, 5, 5, rng);
  Tensor<double> D(1, 1, 5, 5);
  for (auto& v : D.data) v = 4.2;
  Tape<double> tape;
  CHECK(depth_smoothness_loss(tape.constant(D), I, 10.0).val().data[0] == 0.0);
}

TEST_CASE("depth smoothness of an interior impulse on a flat image is 8/25") {
  Tensor<double> D(1, 1, 5, 5);
  D.at(0, 0, 2, 2) = 1;
  Tensor<double> I(1, 3, 5, 5);
  for (auto& v : I.data) v = 0.5;  // zero Laplacian, edge weights all 1
  Tape<double> tape;
  CHECK(depth_smoothness_loss(tape.constant(D), I, 10.0).val().data[0] ==
        doctest::Approx(8.0 / 25.0).epsilon(1e-12));
}

TEST_CASE("raising gamma never increases the smoothness loss") {
  std::mt19937_64 rng(6);
  Tensor<double> D = rnd(1, 1, 6, 6, rng, 1.0, 5.0);
  Tensor<double> I = rnd(1, 3, 6, 6, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double gamma : {0.0, 1.0, 5.0, 10.0, 50.0}) {
    Tape<double> tape;
    const double l =
        depth_smoothness_loss(tape.constant(D), I, gamma).val().data[0];
    CHECK(l <= prev);
    prev = l;
  }
}

TEST_CASE("photometric loss of identical images is zero") {
  std::mt19937_64 rng(7);
  Tensor<double> I = rnd(1, 3, 6, 6, rng);
  Tape<double> tape;
  CHECK(photometric_loss(tape.constant(I), tape.constant(I), 0.85)
            .val()
            .data[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("beta = 0 reduces the photometric loss to plain L1") {
  Tensor<double> a(1, 3, 4, 4), b(1, 3, 4, 4);
  const double d = 0.23;
  for (auto& v : a.data) v = 0.3;
  for (auto& v : b.data) v = 0.3 + d;
  Tape<double> tape;
  CHECK(photometric_loss(tape.constant(a), tape.constant(b), 0.0)
            .val()
            .data[0] == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("photometric loss is bounded on [0,1] images") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Tape<double> tape;
    const double l = photometric_loss(tape.constant(rnd(1, 3, 6, 6, rng)),
                                      tape.constant(rnd(1, 3, 6, 6, rng)), 0.85)
                         .val()
                         .data[0];
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
  }
}

TEST_CASE("flow smoothness: constants and affine fields") {
  std::mt19937_64 rng(9);
  Tensor<double> I = rnd(1, 3, 5, 5, rng);
  Tensor<double> flow(1, 2, 5, 5);
  for (auto& v : flow.data) v = 2.5;
  Tape<double> tape;
  CHECK(flow_smoothness_loss(tape.constant(flow), I, 10.0).val().data[0] == 0.0);

  // affine field dx = a*x + b: zero Laplacian at interior pixels
  Tensor<double> affine(1, 2, 5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      affine.at(0, 0, y, x) = 0.7 * x - 0.2;
      affine.at(0, 1, y, x) = -0.3 * y + 1.0;
    }
  Tensor<double> lap = laplacian(affine);
  for (int c = 0; c < 2; ++c)
    for (int y = 1; y < 4; ++y)
      for (int x = 1; x < 4; ++x)
        CHECK(lap.at(0, c, y, x) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("doubling the flow doubles its smoothness loss") {
  std::mt19937_64 rng(10);
  Tensor<double> I = rnd(1, 3, 6, 6, rng);
  Tensor<double> flow = rnd(1, 2, 6, 6, rng, -2, 2);
  Tensor<double> twice = flow;
  for (auto& v : twice.data) v *= 2;
  Tape<double> tape;
  const double l1 = flow_smoothness_loss(tape.constant(flow), I, 10.0).val().data[0];
  const double l2 = flow_smoothness_loss(tape.constant(twice), I, 10.0).val().data[0];
  CHECK(l2 == doctest::Approx(2 * l1).epsilon(1e-9));
}

TEST_CASE("all loss terms are non-negative on random inputs") {
  std::mt19937_64 rng(11);
  Tape<double> tape;
  Tensor<double> I = rnd(1, 3, 6, 6, rng);
  CHECK(si_loss(rnd(1, 1, 6, 6, rng, 0.5, 10.0),
                rnd(1, 1, 6, 6, rng, 0.5, 10.0), 0.5) >= 0.0);
  CHECK(depth_smoothness_loss(tape.constant(rnd(1, 1, 6, 6, rng, 1, 5)), I, 10.0)
            .val()
            .data[0] >= 0.0);
  CHECK(photometric_loss(tape.constant(rnd(1, 3, 6, 6, rng)),
                         tape.constant(rnd(1, 3, 6, 6, rng)), 0.85)
            .val()
            .data[0] >= 0.0);
}

namespace {

// assembles a StepOutput by hand for total_loss composition tests
StepOutput<double> manual_step(Tape<double>& tape, const Tensor<double>& depth,
                               int h, int w) {
  StepOutput<double> s;
  s.depth = tape.constant(depth);
  s.r1 = tape.constant(Tensor<double>(1, 2, h, w));
  s.r2 = tape.constant(Tensor<double>(1, 2, h / 2, w / 2));
  s.r3 = tape.constant(Tensor<double>(1, 2, h / 4, w / 4));
  return s;
}

}  // namespace

TEST_CASE("zero lambda weights reduce the total loss to the SI term") {
  std::mt19937_64 rng(12);
  Tape<double> tape;
  const int h = 8, w = 8;
  std::vector<Tensor<double>> frames = {rnd(1, 3, h, w, rng),
                                        rnd(1, 3, h, w, rng)};
  std::vector<Tensor<double>> gts = {rnd(1, 1, h, w, rng, 1, 10),
                                     rnd(1, 1, h, w, rng, 1, 10)};
  std::vector<StepOutput<double>> steps;
  steps.push_back(manual_step(tape, rnd(1, 1, h, w, rng, 0.5, 8), h, w));
  steps.push_back(manual_step(tape, rnd(1, 1, h, w, rng, 0.5, 8), h, w));
  LossConfig cfg;
  cfg.lambda = 0;
  cfg.lambda_d = 0;
  cfg.lambda_o = 0;
  WindowLoss<double> total = total_loss(tape, steps, frames, gts, cfg);
  const double si = (si_loss(steps[0].depth.val(), gts[0], cfg.alpha) +
                     si_loss(steps[1].depth.val(), gts[1], cfg.alpha)) /
                    2.0;
  CHECK(total.total.val().data[0] == doctest::Approx(si).epsilon(1e-9));
}

TEST_CASE("perfect depth on a static scene gives zero total loss") {
  Tape<double> tape;
  const int h = 8, w = 8;
  Tensor<double> frame(1, 3, h, w);
  for (auto& v : frame.data) v = 0.4;
  Tensor<double> G(1, 1, h, w);
  for (auto& v : G.data) v = 5.0;
  std::vector<Tensor<double>> frames = {frame, frame};
  std::vector<Tensor<double>> gts = {G, G};
  std::vector<StepOutput<double>> steps = {manual_step(tape, G, h, w),
                                           manual_step(tape, G, h, w)};
  WindowLoss<double> total = total_loss(tape, steps, frames, gts, LossConfig{});
  CHECK(total.total.val().data[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("per-term breakdown carries every named component") {
  std::mt19937_64 rng(13);
  Tape<double> tape;
  const int h = 8, w = 8;
  std::vector<Tensor<double>> frames = {rnd(1, 3, h, w, rng),
                                        rnd(1, 3, h, w, rng)};
  std::vector<Tensor<double>> gts = {rnd(1, 1, h, w, rng, 1, 10),
                                     rnd(1, 1, h, w, rng, 1, 10)};
  std::vector<StepOutput<double>> steps = {
      manual_step(tape, rnd(1, 1, h, w, rng, 0.5, 8), h, w),
      manual_step(tape, rnd(1, 1, h, w, rng, 0.5, 8), h, w)};
  WindowLoss<double> total = total_loss(tape, steps, frames, gts, LossConfig{});
  for (const char* key : {"L_SI", "L_DS", "L_PH1", "L_PH2", "L_PH3", "L_OS1",
                          "L_OS2", "L_OS3", "total"})
    CHECK(total.terms.count(key) == 1);
}

TEST_CASE("loss gradients match finite differences at 8x8") {
  std::mt19937_64 rng(14);
  const Tensor<double> G = rnd(1, 1, 8, 8, rng, 1.0, 10.0);
  const Tensor<double> I = rnd(1, 3, 8, 8, rng);
  const Tensor<double> D0 = rnd(1, 1, 8, 8, rng, 0.5, 8.0);
  auto fd_check = [&](auto loss_fn, const Tensor<double>& x) {
    Tape<double> tape;
    Ref<double> xr = tape.variable(x);
    tape.backward(loss_fn(xr));
    const Tensor<double> g = tape.gradient(xr);
    const double h = 1e-4;
    for (size_t i = 0; i < x.size(); i += 7) {  // spot-check a lattice
      Tensor<double> p = x, m = x;
      p.data[i] += h;
      m.data[i] -= h;
      Tape<double> tp, tm;
      const double fd = (loss_fn(tp.constant(p)).val().data[0] -
                         loss_fn(tm.constant(m)).val().data[0]) /
                        (2 * h);
      CHECK(g.data[i] ==
            doctest::Approx(fd).epsilon(1e-4).scale(std::max(1.0, std::abs(fd))));
    }
  };
  fd_check([&](Ref<double> d) { return scale_invariant_loss(d, G, 0.5); }, D0);
  fd_check([&](Ref<double> d) { return depth_smoothness_loss(d, I, 10.0); }, D0);
  const Tensor<double> J = rnd(1, 3, 8, 8, rng);
  fd_check(
      [&](Ref<double> x) {
        Tape<double>& t = *x.tape;
        return photometric_loss(x, t.constant(J), 0.85);
      },
      rnd(1, 3, 8, 8, rng));
}
