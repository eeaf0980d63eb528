// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "shardcast/frame.hpp"

using namespace shardcast;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/shardcast_media_") + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("y4m mono 16x16 loads header-declared frames") {
  std::string path = temp_path("mono.y4m");
  std::string payload(256, '\x40');
  std::string data = "YUV4MPEG2 W16 H16 F25:1 Ip A1:1 Cmono\n";
  for (int i = 0; i < 3; ++i) data += "FRAME\n" + payload;
  write_file(path, data);

  auto seq = load_y4m(path);
  CHECK(seq.width == 16);
  CHECK(seq.height == 16);
  CHECK(seq.mono);
  REQUIRE(seq.frames.size() == 3);
  CHECK(seq.frames[0].y.size() == 256);
  CHECK(seq.frames[2].y[100] == 0x40);
}

TEST_CASE("y4m bad signature is a parse error naming the token") {
  std::string path = temp_path("badsig.y4m");
  write_file(path, "YUV4MPEG3 W16 H16 F25:1\nFRAME\n" + std::string(256, 'x'));
  CHECK_THROWS_WITH_AS(load_y4m(path), doctest::Contains("YUV4MPEG3"), ParseError);
}

TEST_CASE("y4m 420 planes have half-size chroma") {
  std::string path = temp_path("c420.y4m");
  VideoSequence seq;
  seq.width = 1280;
  seq.height = 720;
  seq.mono = false;
  seq.colorspace = "420";
  Frame f = Frame::make(1280, 720, false);
  for (size_t i = 0; i < f.y.size(); ++i) f.y[i] = static_cast<uint8_t>(i * 7);
  for (size_t i = 0; i < f.cb.size(); ++i) f.cb[i] = static_cast<uint8_t>(i * 3);
  for (size_t i = 0; i < f.cr.size(); ++i) f.cr[i] = static_cast<uint8_t>(i * 5);
  seq.frames.push_back(f);
  save_y4m(path, seq);

  auto loaded = load_y4m(path);
  REQUIRE(loaded.frames.size() == 1);
  CHECK(loaded.frames[0].cb.size() == 640u * 360u);
  CHECK(loaded.frames[0].cr.size() == 640u * 360u);
  CHECK(loaded.frames[0] == f);
}

TEST_CASE("y4m round trip reproduces sample payload byte for byte") {
  std::string path1 = temp_path("rt1.y4m");
  std::string path2 = temp_path("rt2.y4m");
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kTexturedNoise;
  spec.width = 32;
  spec.height = 32;
  spec.mono = false;
  spec.seed = 7;
  VideoSequence seq;
  seq.width = 32;
  seq.height = 32;
  seq.mono = false;
  for (uint32_t i = 0; i < 4; ++i) seq.frames.push_back(synth_frame(spec, i));
  save_y4m(path1, seq);
  auto loaded = load_y4m(path1);
  save_y4m(path2, loaded);

  std::ifstream a(path1, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  for (uint32_t i = 0; i < 4; ++i) CHECK(loaded.frames[i] == seq.frames[i]);
}

TEST_CASE("y4m unaligned dimensions rejected with pad hint") {
  std::string path = temp_path("unaligned.y4m");
  write_file(path, "YUV4MPEG2 W20 H20 F25:1 Cmono\nFRAME\n" + std::string(400, 'x'));
  CHECK_THROWS_WITH_AS(load_y4m(path), doctest::Contains("32x32"), ParseError);

  std::string padded = temp_path("padded.y4m");
  pad_y4m_file(path, padded);
  auto seq = load_y4m(padded);
  CHECK(seq.width == 32);
  CHECK(seq.height == 32);
  REQUIRE(seq.frames.size() == 1);
  // padding replicates the edge
  CHECK(seq.frames[0].y[31] == 'x');
}

TEST_CASE("y4m rejects 10-bit and non-420 pixel formats") {
  std::string path = temp_path("c444.y4m");
  write_file(path, "YUV4MPEG2 W16 H16 F25:1 C444\nFRAME\n" + std::string(768, 'x'));
  CHECK_THROWS_AS(load_y4m(path), ParseError);
  write_file(path, "YUV4MPEG2 W16 H16 F25:1 C420p10\nFRAME\n" + std::string(768, 'x'));
  CHECK_THROWS_AS(load_y4m(path), ParseError);
}

TEST_CASE("trace constant resamples to 11 grid points") {
  std::string path = temp_path("const.csv");
  write_file(path, "0,8000000\n1,8000000\n");
  auto t = load_trace(path);
  REQUIRE(t.sample_bps.size() == 11);
  for (auto v : t.sample_bps) CHECK(v == 8000000);
}

TEST_CASE("trace linear interpolation hits midpoints") {
  std::string path = temp_path("lin.csv");
  write_file(path, "time_s,bandwidth_bps\n0,2000000\n1,4000000\n");
  auto t = load_trace(path);
  REQUIRE(t.sample_bps.size() == 11);
  CHECK(t.sample_bps[5] == 3000000);  // t = 0.5
  CHECK(t.sample_bps[0] == 2000000);
  CHECK(t.sample_bps[10] == 4000000);
}

TEST_CASE("trace resampling preserves values at original instants") {
  std::string path = temp_path("orig.csv");
  write_file(path, "0,200000\n0.5,7000000\n1.2,8000000\n2.0,1200000\n");
  auto t = load_trace(path);
  CHECK(t.sample_bps[0] == 200000);
  CHECK(t.sample_bps[5] == 7000000);
  CHECK(t.sample_bps[12] == 8000000);
  CHECK(t.sample_bps[20] == 1200000);
  // min/max of the resampled grid stay within the trace's range
  for (auto v : t.sample_bps) {
    CHECK(v >= 200000);
    CHECK(v <= 8000000);
  }
}

TEST_CASE("trace errors: non-monotone time and negative rate") {
  std::string path = temp_path("bad.csv");
  write_file(path, "0,100\n1,100\n0.5,200\n");
  CHECK_THROWS_AS(load_trace(path), ParseError);
  write_file(path, "0,100\n1,-5\n");
  CHECK_THROWS_AS(load_trace(path), ParseError);
}

TEST_CASE("checkerboard with zero velocity is static") {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kCheckerboard;
  spec.width = 64;
  spec.height = 64;
  CHECK(synth_frame(spec, 0).y == synth_frame(spec, 5).y);
}

TEST_CASE("gradient with velocity (2,0) translates with wraparound") {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kMovingGradient;
  spec.width = 64;
  spec.height = 32;
  spec.vx = 2;
  Frame f0 = synth_frame(spec, 0);
  Frame f1 = synth_frame(spec, 1);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 64; ++x) {
      int sx = (x - 2 + 64) % 64;
      CHECK(f1.y[static_cast<size_t>(y) * 64 + x] == f0.y[static_cast<size_t>(y) * 64 + sx]);
    }
  }
}

TEST_CASE("textured noise is deterministic in (spec, index)") {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kTexturedNoise;
  spec.width = 32;
  spec.height = 32;
  spec.seed = 42;
  CHECK(synth_frame(spec, 3) == synth_frame(spec, 3));
  spec.seed = 43;
  CHECK(synth_frame(spec, 3).y != synth_frame({SynthPattern::kTexturedNoise, 32, 32, true, 0, 0, 42}, 3).y);
}
