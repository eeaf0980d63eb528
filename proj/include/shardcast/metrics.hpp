// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <string>

#include "shardcast/frame.hpp"
#include "shardcast/timeline.hpp"

namespace shardcast {

// Luma PSNR in dB; identical frames report the 99 dB sentinel.
double psnr(const Frame& a, const Frame& b);

// Mean SSIM over the luma plane: 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, L=255, averaged over windows fully inside the frame.
double ssim(const Frame& a, const Frame& b);

// -10 log10(1 - s), capped at 60 dB for s = 1.
double ssim_db(double s);

struct DelayStats {
  double mean_ms = 0.0;
  double p98_ms = 0.0;  // nearest-rank percentile over rendered frames
};
DelayStats delay_stats(const SessionTimeline& timeline);

struct Smoothness {
  double non_rendered_frac = 0.0;  // undecodable or later than 400 ms
  double stalls_per_s = 0.0;       // inter-render gaps > 200 ms
  double stall_ratio = 0.0;        // total stall-gap time / session length
};
Smoothness smoothness(const SessionTimeline& timeline);

constexpr int64_t kNonRenderedUs = 400000;  // frame counts non-rendered above this
constexpr int64_t kStallGapUs = 200000;     // inter-frame gap counts a stall above this

struct QualityReport {
  std::string scheme;
  double mean_ssim_db = 0.0;
  double mean_psnr_db = 0.0;
  double mean_delay_ms = 0.0;
  double p98_delay_ms = 0.0;
  double non_rendered_frac = 0.0;
  double stalls_per_s = 0.0;
  double stall_ratio = 0.0;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

QualityReport make_report(const SessionTimeline& timeline);

}  // namespace shardcast
