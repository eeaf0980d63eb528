// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shardcast/metrics.hpp"
#include "shardcast/netsim.hpp"
#include "shardcast/transport.hpp"

namespace shardcast {

// Frame source shared by all schemes of a comparative run: either a
// deterministic synthetic generator or a loaded Y4M sequence.
class VideoSource {
 public:
  static VideoSource synthetic(SyntheticSpec spec, uint32_t frame_count);
  static VideoSource from_y4m(const std::string& path);

  Frame frame(uint32_t index) const;
  uint32_t frame_count() const { return frame_count_; }
  VideoParams params() const { return {width_, height_, mono_}; }

 private:
  bool synthetic_ = true;
  SyntheticSpec spec_;
  uint32_t frame_count_ = 0;
  int width_ = 0;
  int height_ = 0;
  bool mono_ = true;
  std::vector<Frame> frames_;
};

struct SimConfig {
  TransportConfig transport;
  NetConfig net;
  ControllerKind controller = ControllerKind::kOracleTrace;
  int64_t initial_target_bps = 1000000;
  double duration_s = 10.0;
  uint64_t seed = 1;
  bool compute_ssim = true;
};

// Runs one sender/link/receiver session over the trace; deterministic in
// (config, seed). Per-frame quality is measured against the source at decode
// time.
SessionTimeline run_session(const VideoSource& source, const SimConfig& config);

// --- loss sweep ----------------------------------------------------------------
//
// Quality-versus-loss at a fixed per-frame byte budget, netsim bypassed:
// per frame, drop exactly ceil(rate * n) of its n packets (seeded), decode
// from the survivors against the lossless reference chain, and average.

struct SweepPoint {
  double rate = 0.0;
  double mean_psnr_db = 0.0;
  double mean_ssim_db = 0.0;
  double rendered_frac = 0.0;  // fraction of (frame, seed) pairs that produced output
  bool undecodable = false;    // no frame decodable at this rate (hard cliff)
};

struct SweepResult {
  std::string scheme;
  std::vector<SweepPoint> points;
};

struct SweepConfig {
  std::vector<double> rates;
  int seeds = 20;
  uint64_t root_seed = 1;
  size_t frame_budget_bytes = 15000;
  double fec_redundancy = 0.5;
  int mtu = kDefaultMtu;
  int ipatch_k = 30;
  bool compute_ssim = false;
  CodecConfig codec;
};

SweepResult run_loss_sweep(Scheme scheme, const VideoSource& source, uint32_t frames,
                           const SweepConfig& config);

}  // namespace shardcast
