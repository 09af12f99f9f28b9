#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fgd/dataset.hpp"
#include "fgd/io.hpp"
#include "fgd/network.hpp"

using namespace fgd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fgd_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  return std::vector<char>(std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("pfm round trip is bitwise exact") {
  TempDir tmp;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> dist(0.01f, 80.0f);
  Tensor<float> depth(1, 1, 7, 11);
  for (float& v : depth.data) v = dist(rng);
  write_pfm(tmp.file("d.pfm"), depth);
  Tensor<float> back = read_pfm<float>(tmp.file("d.pfm"));
  REQUIRE(back.same_shape(depth));
  for (size_t i = 0; i < depth.data.size(); ++i)
    CHECK(back.data[i] == depth.data[i]);
}

TEST_CASE("pfm payload of a 1x1 map is the exact float") {
  TempDir tmp;
  Tensor<float> one(1, 1, 1, 1);
  one.data[0] = 3.25f;
  write_pfm(tmp.file("one.pfm"), one);
  auto bytes = slurp(tmp.file("one.pfm"));
  REQUIRE(bytes.size() >= 4);
  float payload;
  std::memcpy(&payload, bytes.data() + bytes.size() - 4, 4);
  CHECK(payload == 3.25f);
}

TEST_CASE("pfm rejects bad magic, truncation, and NaN") {
  TempDir tmp;
  spit(tmp.file("bad.pfm"), {'P', 'F', '\n', '1', ' ', '1', '\n'});
  CHECK_THROWS_AS(read_pfm<float>(tmp.file("bad.pfm")), const io_error&);

  Tensor<float> depth(1, 1, 4, 4);
  for (size_t i = 0; i < depth.data.size(); ++i) depth.data[i] = float(i);
  write_pfm(tmp.file("full.pfm"), depth);
  auto bytes = slurp(tmp.file("full.pfm"));
  bytes.resize(bytes.size() - 5);
  spit(tmp.file("cut.pfm"), bytes);
  CHECK_THROWS_AS(read_pfm<float>(tmp.file("cut.pfm")), const io_error&);

  depth.data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(write_pfm(tmp.file("nan.pfm"), depth), const io_error&);

  CHECK_THROWS_AS(read_pfm<float>(tmp.file("missing.pfm")), const io_error&);
}

TEST_CASE("flo round trip is bitwise exact") {
  TempDir tmp;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> dist(-6.0f, 6.0f);
  Tensor<float> flow(1, 2, 5, 9);
  for (float& v : flow.data) v = dist(rng);
  write_flo(tmp.file("f.flo"), flow);
  Tensor<float> back = read_flo<float>(tmp.file("f.flo"));
  REQUIRE(back.same_shape(flow));
  for (size_t i = 0; i < flow.data.size(); ++i)
    CHECK(back.data[i] == flow.data[i]);
}

TEST_CASE("flo layout: 12-byte header then interleaved floats") {
  TempDir tmp;
  Tensor<float> zero(1, 2, 4, 4);
  write_flo(tmp.file("zero.flo"), zero);
  auto bytes = slurp(tmp.file("zero.flo"));
  REQUIRE(bytes.size() == 12 + 32 * 4);
  float sentinel;
  int32_t w, h;
  std::memcpy(&sentinel, bytes.data(), 4);
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  CHECK(sentinel == kFloSentinel);
  CHECK(w == 4);
  CHECK(h == 4);
  for (int i = 0; i < 32; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + 12 + i * 4, 4);
    CHECK(v == 0.0f);
  }
}

TEST_CASE("flo rejects bad sentinel and truncation") {
  TempDir tmp;
  Tensor<float> flow(1, 2, 3, 3);
  write_flo(tmp.file("f.flo"), flow);
  auto bytes = slurp(tmp.file("f.flo"));

  auto corrupt = bytes;
  corrupt[0] = 0;
  spit(tmp.file("bad.flo"), corrupt);
  CHECK_THROWS_AS(read_flo<float>(tmp.file("bad.flo")), const io_error&);

  bytes.resize(bytes.size() - 3);
  spit(tmp.file("cut.flo"), bytes);
  CHECK_THROWS_AS(read_flo<float>(tmp.file("cut.flo")), const io_error&);
}

TEST_CASE("ppm round trip is exact on the 8-bit lattice") {
  TempDir tmp;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dist(0, 255);
  Tensor<float> img(1, 3, 6, 8);
  for (float& v : img.data) v = float(dist(rng)) / 255.0f;
  write_ppm(tmp.file("i.ppm"), img);
  Tensor<float> back = read_ppm<float>(tmp.file("i.ppm"));
  REQUIRE(back.same_shape(img));
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("ppm encodes 1.0 as byte 255") {
  TempDir tmp;
  Tensor<float> img(1, 3, 1, 1);
  img.data = {1.0f, 0.0f, 0.5f};
  write_ppm(tmp.file("px.ppm"), img);
  auto bytes = slurp(tmp.file("px.ppm"));
  REQUIRE(bytes.size() >= 3);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 3]) == 255);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 128);
}

TEST_CASE("ppm rejects malformed headers") {
  TempDir tmp;
  spit(tmp.file("p5.ppm"), {'P', '5', '\n', '1', ' ', '1', '\n', '2', '5',
                            '5', '\n', 'x'});
  CHECK_THROWS_AS(read_ppm<float>(tmp.file("p5.ppm")), const io_error&);

  spit(tmp.file("depth.ppm"), {'P', '6', '\n', '1', ' ', '1', '\n', '6', '5',
                               '5', '3', '5', '\n'});
  CHECK_THROWS_AS(read_ppm<float>(tmp.file("depth.ppm")), const io_error&);
}

TEST_CASE("checkpoint round trip restores everything bit-exactly") {
  TempDir tmp;
  ModelConfig cfg;
  cfg.channel_scale = 64;
  Checkpoint<float> ck;
  ck.config = cfg;
  ck.step = 42;
  ck.params = init_model_params<float>(cfg, 5);
  AdamState<float> adam;
  adam.lr = 3e-4f;
  adam.step = 7;
  adam.moments["Sconv1"].m_w = Tensor<float>(1, 1, 3, 3);
  adam.moments["Sconv1"].m_w.data[4] = 0.25f;
  ck.optimizer["spatial"] = adam;
  ck.optimizer["decoder"] = AdamState<float>{};

  save_checkpoint(tmp.file("a.ckpt"), ck);
  Checkpoint<float> back = load_checkpoint<float>(tmp.file("a.ckpt"));

  CHECK(back.step == 42);
  CHECK(back.config.channel_scale == 64);
  auto eq_set = [](const ParamSet<float>& u, const ParamSet<float>& v) {
    REQUIRE(u.size() == v.size());
    for (const auto& [name, entry] : u) {
      REQUIRE(v.count(name) == 1);
      const auto& other = v.at(name);
      REQUIRE(entry.weight.same_shape(other.weight));
      for (size_t i = 0; i < entry.weight.data.size(); ++i)
        CHECK(entry.weight.data[i] == other.weight.data[i]);
      REQUIRE(entry.has_bias() == other.has_bias());
      for (size_t i = 0; i < entry.bias.data.size(); ++i)
        CHECK(entry.bias.data[i] == other.bias.data[i]);
    }
  };
  eq_set(ck.params.spatial, back.params.spatial);
  eq_set(ck.params.temporal, back.params.temporal);
  eq_set(ck.params.memory, back.params.memory);
  eq_set(ck.params.decoder, back.params.decoder);
  eq_set(ck.params.flow_refine, back.params.flow_refine);

  REQUIRE(back.optimizer.count("spatial") == 1);
  const auto& a2 = back.optimizer.at("spatial");
  CHECK(a2.lr == 3e-4f);
  CHECK(a2.step == 7);
  REQUIRE(a2.moments.count("Sconv1") == 1);
  CHECK(a2.moments.at("Sconv1").m_w.data[4] == 0.25f);

  // save -> load -> save yields byte-identical files
  save_checkpoint(tmp.file("b.ckpt"), back);
  CHECK(slurp(tmp.file("a.ckpt")) == slurp(tmp.file("b.ckpt")));
}

TEST_CASE("checkpoint rejects bad magic and version") {
  TempDir tmp;
  ModelConfig cfg;
  cfg.channel_scale = 64;
  Checkpoint<float> ck;
  ck.config = cfg;
  ck.params = init_model_params<float>(cfg, 1);
  save_checkpoint(tmp.file("c.ckpt"), ck);

  auto bytes = slurp(tmp.file("c.ckpt"));
  auto bad = bytes;
  bad[0] = 'X';
  spit(tmp.file("bad.ckpt"), bad);
  CHECK_THROWS_AS(load_checkpoint<float>(tmp.file("bad.ckpt")),
                  const io_error&);

  auto vers = bytes;
  vers[8] = char(kCheckpointVersion + 1);  // version is little-endian u32
  spit(tmp.file("vers.ckpt"), vers);
  CHECK_THROWS_AS(load_checkpoint<float>(tmp.file("vers.ckpt")),
                  const io_error&);
}

TEST_CASE("config parser handles comments, blanks, and errors") {
  std::istringstream in(
      "# full line comment\n"
      "steps = 100\n"
      "\n"
      "  lr =  1e-4  # trailing comment\n"
      "name = desk run\n");
  auto kv = parse_config(in);
  CHECK(kv.size() == 3);
  CHECK(kv.at("steps") == "100");
  CHECK(kv.at("lr") == "1e-4");
  CHECK(kv.at("name") == "desk run");

  std::istringstream bad("no_equals_here\n");
  CHECK_THROWS_AS(parse_config(bad), const io_error&);
  std::istringstream empty_key(" = 3\n");
  CHECK_THROWS_AS(parse_config(empty_key), const io_error&);
}

TEST_CASE("dataset sequence round trip") {
  TempDir tmp;
  SceneConfig scfg;
  scfg.height = 32;
  scfg.width = 48;
  scfg.sprite_count = 2;
  scfg.sprite_size = 10;
  scfg.frames = 3;
  scfg.flow_noise = 0.2;
  auto seq = generate_sequence<float>(scfg, 6);
  write_sequence(tmp.path / "seq_0000", seq);
  auto back = read_sequence<float>(tmp.path / "seq_0000");

  REQUIRE(back.frames.size() == seq.frames.size());
  REQUIRE(back.depths.size() == seq.depths.size());
  REQUIRE(back.flows_gt.size() == seq.flows_gt.size());
  REQUIRE(back.flows_input.size() == seq.flows_input.size());
  REQUIRE(back.masks.size() == seq.masks.size());
  // depths, flows, masks are stored as raw floats: bit-exact
  for (size_t t = 0; t < seq.depths.size(); ++t)
    for (size_t i = 0; i < seq.depths[t].data.size(); ++i)
      CHECK(back.depths[t].data[i] == seq.depths[t].data[i]);
  for (size_t t = 0; t < seq.flows_gt.size(); ++t) {
    for (size_t i = 0; i < seq.flows_gt[t].data.size(); ++i)
      CHECK(back.flows_gt[t].data[i] == seq.flows_gt[t].data[i]);
    for (size_t i = 0; i < seq.flows_input[t].data.size(); ++i)
      CHECK(back.flows_input[t].data[i] == seq.flows_input[t].data[i]);
    for (size_t i = 0; i < seq.masks[t].data.size(); ++i)
      CHECK(back.masks[t].data[i] == seq.masks[t].data[i]);
  }
  // frames pass through the 8-bit lattice: within half a step
  for (size_t t = 0; t < seq.frames.size(); ++t)
    for (size_t i = 0; i < seq.frames[t].data.size(); ++i)
      CHECK(std::abs(back.frames[t].data[i] - seq.frames[t].data[i]) <=
            0.5f / 255.0f + 1e-6f);

  auto dirs = list_sequences(tmp.path);
  REQUIRE(dirs.size() == 1);
  CHECK(dirs[0].filename() == "seq_0000");
  CHECK_THROWS_AS(list_sequences(tmp.path / "nope"), const io_error&);
}

TEST_CASE("depth colorization emits a full-range rgb image") {
  Tensor<float> depth(1, 1, 2, 8);
  for (int i = 0; i < 16; ++i) depth.data[i] = 1.0f + float(i) * 5.0f;
  Tensor<float> rgb = colorize_depth(depth, 1.0, 80.0);
  CHECK(rgb.c == 3);
  CHECK(rgb.h == 2);
  CHECK(rgb.w == 8);
  for (float v : rgb.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // different depths map to different colors
  bool varies = false;
  for (int x = 1; x < 8 && !varies; ++x)
    varies = rgb.at(0, 0, 0, x) != rgb.at(0, 0, 0, 0) ||
             rgb.at(0, 1, 0, x) != rgb.at(0, 1, 0, 0) ||
             rgb.at(0, 2, 0, x) != rgb.at(0, 2, 0, 0);
  CHECK(varies);
}
