// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shardcast/util.hpp"

namespace shardcast {

constexpr int kMacroblock = 16;

// One planar 8-bit frame, either luma-only or 4:2:0 Y/Cb/Cr.
// Width and height are multiples of 16 so the macroblock and packetization
// math stays exact; loaders reject anything else.
struct Frame {
  int width = 0;
  int height = 0;
  bool mono = true;
  uint32_t index = 0;
  std::vector<uint8_t> y;
  std::vector<uint8_t> cb;  // (width/2 x height/2), empty when mono
  std::vector<uint8_t> cr;

  static Frame make(int width, int height, bool mono, uint32_t index = 0);

  int chroma_width() const { return width / 2; }
  int chroma_height() const { return height / 2; }
  int plane_count() const { return mono ? 1 : 3; }

  std::vector<uint8_t>& plane(int p) { return p == 0 ? y : (p == 1 ? cb : cr); }
  const std::vector<uint8_t>& plane(int p) const { return p == 0 ? y : (p == 1 ? cb : cr); }
  int plane_width(int p) const { return p == 0 ? width : chroma_width(); }
  int plane_height(int p) const { return p == 0 ? height : chroma_height(); }

  bool same_dims(const Frame& other) const {
    return width == other.width && height == other.height && mono == other.mono;
  }
  bool operator==(const Frame& other) const {
    return same_dims(other) && y == other.y && cb == other.cb && cr == other.cr;
  }
};

struct VideoSequence {
  int width = 0;
  int height = 0;
  bool mono = true;
  int fps_num = 25;
  int fps_den = 1;
  std::string colorspace;  // Y4M tag as read, re-emitted on write
  std::vector<Frame> frames;
};

// Bandwidth over time, resampled onto a uniform 0.1 s grid starting at t=0.
// sample_bps[k] is the rate for t in [0.1k, 0.1(k+1)).
struct BandwidthTrace {
  std::vector<int64_t> sample_bps;

  static constexpr int64_t kGridUs = 100000;  // 0.1 s

  int64_t rate_at_us(int64_t t_us) const {
    if (sample_bps.empty()) return 0;
    int64_t k = t_us / kGridUs;
    if (k < 0) k = 0;
    if (k >= static_cast<int64_t>(sample_bps.size())) k = static_cast<int64_t>(sample_bps.size()) - 1;
    return sample_bps[static_cast<size_t>(k)];
  }
  int64_t duration_us() const { return static_cast<int64_t>(sample_bps.size()) * kGridUs; }

  static BandwidthTrace constant(int64_t bps, double duration_s);
};

enum class SynthPattern { kMovingGradient, kCheckerboard, kTexturedNoise };

// Deterministic synthetic source: frame t is a pure function of (spec, t).
// Gradient and checkerboard translate by (vx, vy) px/frame with wraparound;
// textured noise is a fixed blurred-noise texture that translates the same way.
struct SyntheticSpec {
  SynthPattern pattern = SynthPattern::kCheckerboard;
  int width = 320;
  int height = 192;
  bool mono = true;
  int vx = 0;
  int vy = 0;
  uint64_t seed = 1;
};

Frame synth_frame(const SyntheticSpec& spec, uint32_t frame_index);

VideoSequence load_y4m(const std::string& path);
void save_y4m(const std::string& path, const VideoSequence& seq);

// CSV `time_s,bandwidth_bps`; `#` comments and an optional header line are
// skipped. Values are linearly resampled onto the 0.1 s grid from t=0 to the
// last timestamp. Rates before the first sample hold the first value.
BandwidthTrace load_trace(const std::string& path);
void save_trace(const std::string& path, const BandwidthTrace& trace);

// Pads an arbitrary-size 8-bit Y4M file to the next multiple-of-16
// dimensions by edge replication. File-level because unaligned dimensions
// cannot be represented as a Frame.
void pad_y4m_file(const std::string& in_path, const std::string& out_path);

}  // namespace shardcast
