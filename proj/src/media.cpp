// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "shardcast/frame.hpp"

namespace shardcast {

Frame Frame::make(int width, int height, bool mono, uint32_t index) {
  if (width <= 0 || height <= 0 || width % kMacroblock != 0 || height % kMacroblock != 0) {
    throw ValidationError("frame dimensions must be positive multiples of 16, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
  Frame f;
  f.width = width;
  f.height = height;
  f.mono = mono;
  f.index = index;
  f.y.assign(static_cast<size_t>(width) * height, 0);
  if (!mono) {
    f.cb.assign(static_cast<size_t>(width / 2) * (height / 2), 128);
    f.cr.assign(static_cast<size_t>(width / 2) * (height / 2), 128);
  }
  return f;
}

BandwidthTrace BandwidthTrace::constant(int64_t bps, double duration_s) {
  if (bps < 0) throw ValidationError("trace rate must be nonnegative");
  BandwidthTrace t;
  size_t n = static_cast<size_t>(std::floor(duration_s / 0.1 + 1e-9)) + 1;
  t.sample_bps.assign(n, bps);
  return t;
}

namespace {

// Wrap x into [0, n). Works for negative shifts.
inline int wrap(int x, int n) {
  x %= n;
  return x < 0 ? x + n : x;
}

uint8_t noise_byte(uint64_t seed, uint64_t a, uint64_t b) {
  Rng r(seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL));
  return static_cast<uint8_t>(r.next_u64() & 0xff);
}

// Base texture at t=0 for each pattern; frames translate it.
uint8_t base_sample(const SyntheticSpec& spec, int plane, int x, int y, int w, int h) {
  switch (spec.pattern) {
    case SynthPattern::kMovingGradient: {
      int v = (x * 256 / w + y * 256 / h) & 0xff;
      if (plane == 1) v = (x * 256 / w) & 0xff;
      if (plane == 2) v = (y * 256 / h) & 0xff;
      return static_cast<uint8_t>(v);
    }
    case SynthPattern::kCheckerboard: {
      bool on = ((x / kMacroblock) + (y / kMacroblock)) % 2 == 0;
      if (plane == 0) return on ? 235 : 16;
      return on ? 160 : 96;
    }
    case SynthPattern::kTexturedNoise: {
      // 3x3 box blur of white noise, applied twice: mid-frequency texture
      // that motion search can lock onto but quantization cannot flatten.
      int acc = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          int weight = (3 - std::abs(dx) > 0 ? 3 - std::abs(dx) : 0) *
                       (3 - std::abs(dy) > 0 ? 3 - std::abs(dy) : 0);
          acc += weight * noise_byte(spec.seed + plane, static_cast<uint64_t>(wrap(x + dx, w)),
                                     static_cast<uint64_t>(wrap(y + dy, h)));
        }
      }
      return static_cast<uint8_t>(acc / 81);
    }
  }
  return 0;
}

}  // namespace

Frame synth_frame(const SyntheticSpec& spec, uint32_t frame_index) {
  Frame f = Frame::make(spec.width, spec.height, spec.mono, frame_index);
  int64_t t = static_cast<int64_t>(frame_index);
  for (int p = 0; p < f.plane_count(); ++p) {
    int w = f.plane_width(p);
    int h = f.plane_height(p);
    // Chroma planes translate at half the pixel velocity.
    int sx = static_cast<int>((static_cast<int64_t>(spec.vx) * t) % w) / (p == 0 ? 1 : 2);
    int sy = static_cast<int>((static_cast<int64_t>(spec.vy) * t) % h) / (p == 0 ? 1 : 2);
    auto& plane = f.plane(p);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        plane[static_cast<size_t>(y) * w + x] =
            base_sample(spec, p, wrap(x - sx, w), wrap(y - sy, h), w, h);
      }
    }
  }
  return f;
}

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

namespace {

struct Y4mHeader {
  int width = 0;
  int height = 0;
  int fps_num = 25;
  int fps_den = 1;
  bool mono = false;
  std::string colorspace = "420";
};

Y4mHeader parse_y4m_header(std::istream& in, const std::string& path) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": empty file");

  auto tokens = split_tokens(header);
  if (tokens.empty() || tokens[0] != "YUV4MPEG2") {
    throw ParseError(path + ": bad signature \"" + (tokens.empty() ? "" : tokens[0]) +
                     "\", expected YUV4MPEG2");
  }

  Y4mHeader h;
  for (size_t i = 1; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t.size() < 2) throw ParseError(path + ": bad header token \"" + t + "\"");
    char tag = t[0];
    std::string val = t.substr(1);
    try {
      switch (tag) {
        case 'W': h.width = std::stoi(val); break;
        case 'H': h.height = std::stoi(val); break;
        case 'F': {
          auto colon = val.find(':');
          if (colon == std::string::npos) throw ParseError("");
          h.fps_num = std::stoi(val.substr(0, colon));
          h.fps_den = std::stoi(val.substr(colon + 1));
          break;
        }
        case 'C': h.colorspace = val; break;
        case 'I': case 'A': case 'X': break;  // interlace/aspect/extension: ignored
        default: throw ParseError("");
      }
    } catch (const std::exception&) {
      throw ParseError(path + ": bad header token \"" + t + "\"");
    }
  }
  if (h.width <= 0 || h.height <= 0) throw ParseError(path + ": missing W/H in header");

  if (h.colorspace == "mono") {
    h.mono = true;
  } else if (h.colorspace == "420" || h.colorspace == "420jpeg" ||
             h.colorspace == "420mpeg2" || h.colorspace == "420paldv") {
    h.mono = false;
  } else {
    throw ParseError(path + ": unsupported colorspace tag \"C" + h.colorspace +
                     "\" (8-bit 420 or mono only)");
  }
  return h;
}

bool read_frame_marker(std::istream& in, const std::string& path) {
  std::string frame_line;
  if (!std::getline(in, frame_line)) return false;
  auto ftok = split_tokens(frame_line);
  if (ftok.empty() || ftok[0] != "FRAME") {
    throw ParseError(path + ": bad frame marker \"" + frame_line + "\"");
  }
  return true;
}

}  // namespace

VideoSequence load_y4m(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);

  Y4mHeader h = parse_y4m_header(in, path);
  if (h.width % kMacroblock != 0 || h.height % kMacroblock != 0) {
    int pw = (h.width + kMacroblock - 1) / kMacroblock * kMacroblock;
    int ph = (h.height + kMacroblock - 1) / kMacroblock * kMacroblock;
    throw ParseError(path + ": dimensions " + std::to_string(h.width) + "x" +
                     std::to_string(h.height) + " are not multiples of 16; pad to " +
                     std::to_string(pw) + "x" + std::to_string(ph) + " first (media-tools pad)");
  }

  VideoSequence seq;
  seq.width = h.width;
  seq.height = h.height;
  seq.mono = h.mono;
  seq.fps_num = h.fps_num;
  seq.fps_den = h.fps_den;
  seq.colorspace = h.colorspace;

  size_t ysize = static_cast<size_t>(h.width) * h.height;
  size_t csize = h.mono ? 0 : static_cast<size_t>(h.width / 2) * (h.height / 2);
  uint32_t index = 0;
  while (read_frame_marker(in, path)) {
    Frame f = Frame::make(h.width, h.height, h.mono, index++);
    in.read(reinterpret_cast<char*>(f.y.data()), static_cast<std::streamsize>(ysize));
    if (!h.mono) {
      in.read(reinterpret_cast<char*>(f.cb.data()), static_cast<std::streamsize>(csize));
      in.read(reinterpret_cast<char*>(f.cr.data()), static_cast<std::streamsize>(csize));
    }
    if (!in) throw ParseError(path + ": truncated frame " + std::to_string(index - 1));
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

void save_y4m(const std::string& path, const VideoSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  std::string cs = seq.mono ? "mono" : (seq.colorspace.empty() ? "420" : seq.colorspace);
  out << "YUV4MPEG2 W" << seq.width << " H" << seq.height << " F" << seq.fps_num << ":"
      << seq.fps_den << " Ip A1:1 C" << cs << "\n";
  for (const Frame& f : seq.frames) {
    out << "FRAME\n";
    out.write(reinterpret_cast<const char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
    if (!f.mono) {
      out.write(reinterpret_cast<const char*>(f.cb.data()), static_cast<std::streamsize>(f.cb.size()));
      out.write(reinterpret_cast<const char*>(f.cr.data()), static_cast<std::streamsize>(f.cr.size()));
    }
  }
  if (!out) throw ParseError("write failed: " + path);
}

BandwidthTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::vector<std::pair<double, double>> points;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    // strip whitespace
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    line = line.substr(start);

    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    double t, bps;
    if (!(is >> t >> bps)) {
      if (points.empty() && lineno == 1) continue;  // optional header line
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected `time_s,bandwidth_bps`");
    }
    if (bps < 0) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": negative rate");
    }
    if (!points.empty() && t <= points.back().first) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": timestamps must be increasing");
    }
    points.emplace_back(t, bps);
  }
  if (points.empty()) throw ParseError(path + ": no samples");

  BandwidthTrace trace;
  size_t n = static_cast<size_t>(std::floor(points.back().first / 0.1 + 1e-9)) + 1;
  trace.sample_bps.reserve(n);
  size_t seg = 0;
  for (size_t k = 0; k < n; ++k) {
    double t = 0.1 * static_cast<double>(k);
    while (seg + 1 < points.size() && points[seg + 1].first <= t) ++seg;
    double v;
    if (t <= points.front().first) {
      v = points.front().second;
    } else if (seg + 1 >= points.size()) {
      v = points.back().second;
    } else {
      auto [t0, v0] = points[seg];
      auto [t1, v1] = points[seg + 1];
      v = v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
    trace.sample_bps.push_back(std::llround(v));
  }
  return trace;
}

void save_trace(const std::string& path, const BandwidthTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << "time_s,bandwidth_bps\n";
  for (size_t k = 0; k < trace.sample_bps.size(); ++k) {
    out << (0.1 * static_cast<double>(k)) << "," << trace.sample_bps[k] << "\n";
  }
}

void pad_y4m_file(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + in_path);
  Y4mHeader h = parse_y4m_header(in, in_path);
  if (h.width % 2 != 0 || h.height % 2 != 0) {
    if (!h.mono) throw ParseError(in_path + ": odd dimensions with chroma are not supported");
  }

  int pw = (h.width + kMacroblock - 1) / kMacroblock * kMacroblock;
  int ph = (h.height + kMacroblock - 1) / kMacroblock * kMacroblock;

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + out_path + " for writing");
  out << "YUV4MPEG2 W" << pw << " H" << ph << " F" << h.fps_num << ":" << h.fps_den
      << " Ip A1:1 C" << h.colorspace << "\n";

  auto pad_plane = [&](int sw, int sh, int dw, int dh) {
    std::vector<uint8_t> src(static_cast<size_t>(sw) * sh);
    in.read(reinterpret_cast<char*>(src.data()), static_cast<std::streamsize>(src.size()));
    if (!in) throw ParseError(in_path + ": truncated frame payload");
    std::vector<uint8_t> dst(static_cast<size_t>(dw) * dh);
    for (int y = 0; y < dh; ++y) {
      int sy = std::min(y, sh - 1);
      for (int x = 0; x < dw; ++x) {
        dst[static_cast<size_t>(y) * dw + x] = src[static_cast<size_t>(sy) * sw + std::min(x, sw - 1)];
      }
    }
    out.write(reinterpret_cast<const char*>(dst.data()), static_cast<std::streamsize>(dst.size()));
  };

  while (read_frame_marker(in, in_path)) {
    out << "FRAME\n";
    pad_plane(h.width, h.height, pw, ph);
    if (!h.mono) {
      pad_plane(h.width / 2, h.height / 2, pw / 2, ph / 2);
      pad_plane(h.width / 2, h.height / 2, pw / 2, ph / 2);
    }
  }
  if (!out) throw ParseError("write failed: " + out_path);
}

}  // namespace shardcast
