#include "mcf/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <unistd.h>
#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "mcf/errors.hpp"
#include "mcf/fourier_optics.hpp"
#include "mcf/rng.hpp"
#include "oracles.hpp"

using namespace mcf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("mcf_io_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string operator/(const char* name) const { return (dir / name).string(); }
};

std::vector<RealGrid> awkward_stack() {
  std::vector<RealGrid> s(3, RealGrid(8, 8));
  std::mt19937_64 rng(5);
  for (RealGrid& g : s) oracle::fill_random(g, rng, -1e6, 1e6);
  s[0](0, 0) = -0.0;
  s[0](0, 1) = 5e-324;  // denormal
  s[1](3, 3) = 1.7976931348623157e308;
  s[2](7, 7) = -2.2250738585072014e-308;
  return s;
}

bool same_bits(const std::vector<RealGrid>& a, const std::vector<RealGrid>& b) {
  if (a.size() != b.size()) return false;
  for (size_t c = 0; c < a.size(); ++c) {
    if (a[c].rows != b[c].rows || a[c].cols != b[c].cols) return false;
    if (std::memcmp(a[c].v.data(), b[c].v.data(), a[c].v.size() * 8) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("grid stacks round-trip bit for bit") {
  TempDir tmp;
  const std::string path = tmp / "stack.mcf";
  auto stack = awkward_stack();
  io::write_grid_stack(path, stack);
  auto back = io::read_grid_stack(path);
  CHECK(same_bits(stack, back));

  // write -> read -> write must reproduce identical bytes
  const std::string first = io::read_text_file(path);
  io::write_grid_stack(tmp / "stack2.mcf", back);
  CHECK(io::read_text_file(tmp / "stack2.mcf") == first);

  // header layout: magic, channel count, side, dtype, all little-endian
  REQUIRE(first.size() == 16 + 3 * 64 * 8);
  CHECK(first.compare(0, 4, "MCF1") == 0);
  CHECK(static_cast<unsigned char>(first[4]) == 3);
  CHECK(static_cast<unsigned char>(first[8]) == 8);
  CHECK(static_cast<unsigned char>(first[12]) == 1);
}

TEST_CASE("corrupt grid stacks fail with the byte offset") {
  TempDir tmp;
  const std::string path = tmp / "bad.mcf";

  io::write_text_file(path, "JUNK");
  CHECK_THROWS_AS((void)io::read_grid_stack(path), ParseError);

  auto stack = awkward_stack();
  io::write_grid_stack(path, stack);
  std::string bytes = io::read_text_file(path);

  io::write_text_file(path, bytes.substr(0, bytes.size() - 3));  // truncated payload
  CHECK_THROWS_AS((void)io::read_grid_stack(path), ParseError);

  io::write_text_file(path, bytes + "x");  // trailing data
  try {
    (void)io::read_grid_stack(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("trailing") != std::string::npos);
    CHECK(e.line() == static_cast<int>(bytes.size()));
  }

  bytes[12] = 2;  // unsupported dtype
  io::write_text_file(path, bytes);
  CHECK_THROWS_AS((void)io::read_grid_stack(path), ParseError);

  CHECK_THROWS_AS((void)io::read_grid_stack(tmp / "missing.mcf"), InvalidInput);
  CHECK_THROWS_AS(io::write_grid_stack(tmp / "empty.mcf", {}), InvalidInput);
}

TEST_CASE("kernel banks round-trip with their shape header") {
  TempDir tmp;
  const std::string path = tmp / "bank.mck";
  KernelSet ks;
  ks.k = 3;
  ks.channels = 2;
  ks.w.assign(4, std::vector<RealGrid>(2, RealGrid(3, 3)));
  std::mt19937_64 rng(7);
  for (auto& per : ks.w)
    for (RealGrid& g : per) oracle::fill_random(g, rng);

  io::write_kernels(path, ks);
  KernelSet back = io::read_kernels(path);
  REQUIRE(back.count() == 4);
  REQUIRE(back.channels == 2);
  REQUIRE(back.k == 3);
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < 2; ++c) CHECK(back.w[j][c].v == ks.w[j][c].v);

  const std::string bytes = io::read_text_file(path);
  REQUIRE(bytes.size() == 20 + 4 * 2 * 9 * 8);
  CHECK(bytes.compare(0, 4, "MCK1") == 0);
  CHECK(static_cast<unsigned char>(bytes[4]) == 4);
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);
  CHECK(static_cast<unsigned char>(bytes[12]) == 3);

  io::write_text_file(path, bytes.substr(0, 19));
  CHECK_THROWS_AS((void)io::read_kernels(path), ParseError);
}

TEST_CASE("named tensor checkpoints round-trip") {
  TempDir tmp;
  const std::string path = tmp / "ckpt.mcn";
  std::vector<io::NamedTensor> tensors(3);
  tensors[0].name = "dense1.weight";
  tensors[0].dims = {4, 6};
  tensors[0].data.assign(24, 0.0);
  for (size_t i = 0; i < 24; ++i) tensors[0].data[i] = 0.5 * static_cast<double>(i) - 3.3;
  tensors[1].name = "b";
  tensors[1].dims = {5};
  tensors[1].data = {1.0, -2.0, 3.5, -0.0, 1e-300};
  tensors[2].name = "kernels";
  tensors[2].dims = {2, 3, 3, 3};
  tensors[2].data.assign(54, -1.25);

  io::write_tensors(path, tensors);
  auto back = io::read_tensors(path);
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back[i].name == tensors[i].name);
    CHECK(back[i].dims == tensors[i].dims);
    CHECK(std::memcmp(back[i].data.data(), tensors[i].data.data(), back[i].data.size() * 8) == 0);
  }

  const std::string first = io::read_text_file(path);
  io::write_tensors(tmp / "ckpt2.mcn", back);
  CHECK(io::read_text_file(tmp / "ckpt2.mcn") == first);

  tensors[1].data.pop_back();
  CHECK_THROWS_AS(io::write_tensors(path, tensors), InvalidInput);

  io::write_text_file(path, first.substr(0, first.size() / 2));
  CHECK_THROWS_AS((void)io::read_tensors(path), ParseError);
}

TEST_CASE("orientation export matches half the phase and round-trips") {
  TempDir tmp;
  const std::string path = tmp / "angles.csv";
  PhaseProfile phase;
  phase.n = 8;
  phase.channels.assign(2, RealGrid(8, 8));
  for (int c = 0; c < 2; ++c)
    for (size_t i = 0; i < phase.channels[c].v.size(); ++i)
      phase.channels[c].v[i] = rng::kTwoPi * rng::uniform(11, static_cast<uint64_t>(c), i);

  OrientationMap map = phase_to_orientation(phase);
  io::write_orientations(path, map);
  OrientationMap back = io::read_orientations(path);
  REQUIRE(back.n == 8);
  REQUIRE(back.channels.size() == 2);
  for (int c = 0; c < 2; ++c) CHECK(back.channels[c].v == map.channels[c].v);

  // %.17g reprint of identical doubles gives identical bytes
  const std::string first = io::read_text_file(path);
  io::write_orientations(tmp / "angles2.csv", back);
  CHECK(io::read_text_file(tmp / "angles2.csv") == first);

  // spot check one element by hand: the angle is half the phase, mod pi
  const double expect = std::fmod(phase.channels[1](2, 4) / 2.0, oracle::kPi);
  CHECK(map.channels[1](2, 4) == expect);

  io::write_text_file(path, "row,col,channel,angle\n0,0,0,0.1\n1,1,0,0.2\n");
  CHECK_THROWS_AS((void)io::read_orientations(path), ParseError);  // grid not fully covered
  io::write_text_file(path, "row,col,channel,angle\n0,0,0,nope\n");
  CHECK_THROWS_AS((void)io::read_orientations(path), ParseError);
}

TEST_CASE("zero phase exports zero angles") {
  TempDir tmp;
  PhaseProfile phase;
  phase.n = 4;
  phase.channels.assign(1, RealGrid(4, 4));
  OrientationMap map = phase_to_orientation(phase);
  const std::string path = tmp / "zero.csv";
  io::write_orientations(path, map);
  OrientationMap back = io::read_orientations(path);
  for (double a : back.channels[0].v) CHECK(a == 0.0);
}

TEST_CASE("key=value files parse, serialize, and hash deterministically") {
  TempDir tmp;
  const std::string path = tmp / "run.cfg";
  io::write_text_file(path,
                      "# a comment\n"
                      "\n"
                      "kernel_count = 48\n"
                      "pad=20\n"
                      "  mask_n =  512 \n"
                      "curve_path=data/pce_r.csv\n"
                      "rate=0.05\n");
  io::KeyValueFile kv = io::read_key_values(path);
  REQUIRE(kv.entries.size() == 5);
  CHECK(kv.get("kernel_count") == "48");
  CHECK(kv.get_int("pad") == 20);
  CHECK(kv.get_int("mask_n") == 512);
  CHECK(kv.get_double("rate") == 0.05);
  CHECK(kv.get_or("absent", "x") == "x");
  CHECK(kv.find("absent") == nullptr);
  CHECK_THROWS_AS((void)kv.get("absent"), InvalidInput);
  CHECK_THROWS_AS((void)kv.get_int("curve_path"), InvalidInput);

  // canonical serialization round-trips byte-identically
  io::write_key_values(path, kv);
  const std::string first = io::read_text_file(path);
  io::write_key_values(path, io::read_key_values(path));
  CHECK(io::read_text_file(path) == first);
  CHECK(first == "kernel_count=48\npad=20\nmask_n=512\ncurve_path=data/pce_r.csv\nrate=0.05\n");

  // set replaces in place and appends at the end
  kv.set("pad", "8");
  kv.set("extra", "1");
  CHECK(kv.entries[1].second == "8");
  CHECK(kv.entries.back().first == "extra");

  io::write_text_file(path, "a=1\na=2\n");
  CHECK_THROWS_AS((void)io::read_key_values(path), ParseError);
  io::write_text_file(path, "novalue\n");
  CHECK_THROWS_AS((void)io::read_key_values(path), ParseError);
}

TEST_CASE("fnv-1a matches published vectors and names run directories") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(io::fnv1a64("foobar") == 0x85944171f73967e8ULL);

  io::KeyValueFile kv;
  kv.set("a", "1");
  CHECK(io::config_hash(kv) == "ed9ed282c45f76f4");
  io::KeyValueFile other;
  other.set("a", "2");
  CHECK(io::config_hash(other) != io::config_hash(kv));
}

TEST_CASE("16-bit PGM stores an affine map and quantizes no worse than half a step") {
  TempDir tmp;
  const std::string path = tmp / "img.pgm";
  RealGrid g(5, 7);
  std::mt19937_64 rng(13);
  oracle::fill_random(g, rng, -4.0, 9.0);
  io::write_pgm16(path, g);

  const std::string bytes = io::read_text_file(path);
  CHECK(bytes.compare(0, 3, "P5\n") == 0);
  CHECK(bytes.find("# range ") != std::string::npos);
  CHECK(bytes.find("65535") != std::string::npos);

  RealGrid back = io::read_pgm16(path);
  REQUIRE(back.rows == 5);
  REQUIRE(back.cols == 7);
  double lo = g.v[0], hi = g.v[0];
  for (double d : g.v) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double step = (hi - lo) / 65535.0;
  for (size_t i = 0; i < g.v.size(); ++i)
    CHECK(std::fabs(back.v[i] - g.v[i]) <= 0.5 * step + 1e-12 * std::fabs(g.v[i]));

  // extremes map to the exact endpoints
  RealGrid two(1, 2);
  two(0, 0) = -4.0;
  two(0, 1) = 9.0;
  io::write_pgm16(path, two);
  const std::string raw = io::read_text_file(path);
  const size_t px = raw.size() - 4;
  CHECK(static_cast<unsigned char>(raw[px]) == 0x00);      // lo -> 0, big-endian high byte
  CHECK(static_cast<unsigned char>(raw[px + 1]) == 0x00);
  CHECK(static_cast<unsigned char>(raw[px + 2]) == 0xff);  // hi -> 65535
  CHECK(static_cast<unsigned char>(raw[px + 3]) == 0xff);

  RealGrid flat(2, 2, 3.25);
  io::write_pgm16(path, flat);
  back = io::read_pgm16(path);
  for (double d : back.v) CHECK(d == 3.25);
}

TEST_CASE("PPM scenes round-trip within 8-bit quantization") {
  TempDir tmp;
  const std::string path = tmp / "scene.ppm";
  SceneImage scene;
  scene.size = 6;
  scene.channels.assign(3, RealGrid(6, 6));
  std::mt19937_64 rng(17);
  for (RealGrid& ch : scene.channels) oracle::fill_random(ch, rng, 0.0, 1.0);

  io::write_ppm(path, scene);
  SceneImage back = io::read_ppm(path);
  REQUIRE(back.size == 6);
  REQUIRE(back.channel_count() == 3);
  for (int c = 0; c < 3; ++c)
    for (size_t i = 0; i < back.channels[c].v.size(); ++i)
      CHECK(std::fabs(back.channels[c].v[i] - scene.channels[c].v[i]) <= 0.5 / 255.0 + 1e-12);

  io::write_text_file(path, "P6\n3 2\n255\n" + std::string(18, '\0'));
  CHECK_THROWS_AS((void)io::read_ppm(path), InvalidInput);  // non-square
  io::write_text_file(path, "P6\n2 2\n100\n" + std::string(12, '\0'));
  CHECK_THROWS_AS((void)io::read_ppm(path), ParseError);  // wrong maxval
}

TEST_CASE("loss traces round-trip exactly") {
  TempDir tmp;
  const std::string path = tmp / "trace.csv";
  std::vector<double> losses = {1234.5678901234567, 100.25, 3.0000000000000004e-7, 0.0};
  io::write_trace(path, losses);
  auto back = io::read_trace(path);
  REQUIRE(back.size() == losses.size());
  for (size_t i = 0; i < losses.size(); ++i) CHECK(back[i] == losses[i]);

  const std::string first = io::read_text_file(path);
  io::write_trace(path, back);
  CHECK(io::read_text_file(path) == first);
  CHECK(first.compare(0, 15, "iteration,loss\n") == 0);

  io::write_text_file(path, "iteration,loss\n0,1.0\n2,0.5\n");
  CHECK_THROWS_AS((void)io::read_trace(path), ParseError);
}

TEST_CASE("label listings parse with or without a header") {
  TempDir tmp;
  const std::string path = tmp / "labels.csv";
  io::write_text_file(path, "filename,label\nimg_000.ppm,0\nimg_001.ppm,2\n");
  auto rows = io::read_labels_csv(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].first == "img_000.ppm");
  CHECK(rows[0].second == 0);
  CHECK(rows[1].second == 2);

  io::write_text_file(path, "a.ppm,1\n");
  rows = io::read_labels_csv(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].second == 1);

  io::write_text_file(path, "a.ppm,-1\n");
  CHECK_THROWS_AS((void)io::read_labels_csv(path), ParseError);
  io::write_text_file(path, "nolabel\n");
  CHECK_THROWS_AS((void)io::read_labels_csv(path), ParseError);
}
