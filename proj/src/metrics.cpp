// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shardcast/metrics.hpp"

namespace shardcast {

double psnr(const Frame& a, const Frame& b) {
  if (!a.same_dims(b)) throw ValidationError("psnr: dimension mismatch");
  uint64_t sum = 0;
  for (size_t i = 0; i < a.y.size(); ++i) {
    int64_t d = static_cast<int64_t>(a.y[i]) - b.y[i];
    sum += static_cast<uint64_t>(d * d);
  }
  if (sum == 0) return 99.0;
  double mse = static_cast<double>(sum) / static_cast<double>(a.y.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr int kRadius = 5;
constexpr double kSigma = 1.5;

const std::array<double, kWin>& gaussian_kernel() {
  static const std::array<double, kWin> k = [] {
    std::array<double, kWin> g{};
    double sum = 0;
    for (int i = -kRadius; i <= kRadius; ++i) {
      g[static_cast<size_t>(i + kRadius)] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
      sum += g[static_cast<size_t>(i + kRadius)];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();
  return k;
}

// Separable valid-mode Gaussian filter: (w, h) -> (w - 10, h - 10).
std::vector<double> gauss_valid(const std::vector<double>& img, int w, int h) {
  const auto& g = gaussian_kernel();
  int wo = w - 2 * kRadius;
  std::vector<double> tmp(static_cast<size_t>(wo) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < wo; ++x) {
      double acc = 0;
      for (int t = 0; t < kWin; ++t) acc += g[static_cast<size_t>(t)] * img[static_cast<size_t>(y) * w + x + t];
      tmp[static_cast<size_t>(y) * wo + x] = acc;
    }
  }
  int ho = h - 2 * kRadius;
  std::vector<double> out(static_cast<size_t>(wo) * ho, 0.0);
  for (int y = 0; y < ho; ++y) {
    for (int x = 0; x < wo; ++x) {
      double acc = 0;
      for (int t = 0; t < kWin; ++t) acc += g[static_cast<size_t>(t)] * tmp[static_cast<size_t>(y + t) * wo + x];
      out[static_cast<size_t>(y) * wo + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Frame& a, const Frame& b) {
  if (!a.same_dims(b)) throw ValidationError("ssim: dimension mismatch");
  if (a.width < kWin || a.height < kWin) throw ValidationError("ssim: frame smaller than window");

  size_t n = a.y.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (size_t i = 0; i < n; ++i) {
    double xv = a.y[i];
    double yv = b.y[i];
    x[i] = xv;
    y[i] = yv;
    xx[i] = xv * xv;
    yy[i] = yv * yv;
    xy[i] = xv * yv;
  }
  int w = a.width, h = a.height;
  auto mx = gauss_valid(x, w, h);
  auto my = gauss_valid(y, w, h);
  auto mxx = gauss_valid(xx, w, h);
  auto myy = gauss_valid(yy, w, h);
  auto mxy = gauss_valid(xy, w, h);

  constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
  constexpr double kC2 = (0.03 * 255) * (0.03 * 255);
  double total = 0;
  for (size_t i = 0; i < mx.size(); ++i) {
    double ux = mx[i], uy = my[i];
    double vx = mxx[i] - ux * ux;
    double vy = myy[i] - uy * uy;
    double cov = mxy[i] - ux * uy;
    total += ((2 * ux * uy + kC1) * (2 * cov + kC2)) /
             ((ux * ux + uy * uy + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mx.size());
}

double ssim_db(double s) {
  if (s >= 1.0) return 60.0;
  return std::min(60.0, -10.0 * std::log10(1.0 - s));
}

DelayStats delay_stats(const SessionTimeline& timeline) {
  std::vector<int64_t> delays;
  for (const auto& f : timeline.frames) {
    if (f.rendered && f.decode_time_us >= 0) delays.push_back(f.frame_delay_us());
  }
  if (delays.empty()) throw ValidationError("delay_stats: no rendered frames");
  std::sort(delays.begin(), delays.end());
  double mean = 0;
  for (auto d : delays) mean += static_cast<double>(d);
  mean /= static_cast<double>(delays.size());

  // nearest-rank: ceil(0.98 n)-th order statistic
  auto rank = static_cast<size_t>(std::ceil(0.98 * static_cast<double>(delays.size())));
  rank = std::max<size_t>(1, std::min(rank, delays.size()));
  return {mean / 1000.0, static_cast<double>(delays[rank - 1]) / 1000.0};
}

Smoothness smoothness(const SessionTimeline& timeline) {
  Smoothness s;
  if (timeline.frames.empty()) return s;

  size_t non_rendered = 0;
  std::vector<int64_t> render_times;
  for (const auto& f : timeline.frames) {
    bool late = f.decode_time_us >= 0 && f.frame_delay_us() > kNonRenderedUs;
    if (!f.rendered || late) ++non_rendered;
    if (f.rendered && f.decode_time_us >= 0) render_times.push_back(f.decode_time_us);
  }
  s.non_rendered_frac = static_cast<double>(non_rendered) / static_cast<double>(timeline.frames.size());

  std::sort(render_times.begin(), render_times.end());
  int64_t stall_time = 0;
  size_t stalls = 0;
  for (size_t i = 1; i < render_times.size(); ++i) {
    int64_t gap = render_times[i] - render_times[i - 1];
    if (gap > kStallGapUs) {
      ++stalls;
      stall_time += gap;
    }
  }
  double session_s = static_cast<double>(timeline.duration_us) / 1e6;
  if (session_s > 0) {
    s.stalls_per_s = static_cast<double>(stalls) / session_s;
    s.stall_ratio = static_cast<double>(stall_time) / static_cast<double>(timeline.duration_us);
  }
  return s;
}

QualityReport make_report(const SessionTimeline& timeline) {
  QualityReport r;
  r.scheme = timeline.scheme;
  double psnr_sum = 0, ssim_db_sum = 0;
  size_t q = 0;
  for (const auto& f : timeline.frames) {
    if (f.rendered && !std::isnan(f.psnr_db)) {
      psnr_sum += f.psnr_db;
      ssim_db_sum += f.ssim_db;
      ++q;
    }
  }
  if (q > 0) {
    r.mean_psnr_db = psnr_sum / static_cast<double>(q);
    r.mean_ssim_db = ssim_db_sum / static_cast<double>(q);
  }
  bool any_rendered = false;
  for (const auto& f : timeline.frames) any_rendered |= f.rendered;
  if (any_rendered) {
    auto d = delay_stats(timeline);
    r.mean_delay_ms = d.mean_ms;
    r.p98_delay_ms = d.p98_ms;
  }
  auto s = smoothness(timeline);
  r.non_rendered_frac = s.non_rendered_frac;
  r.stalls_per_s = s.stalls_per_s;
  r.stall_ratio = s.stall_ratio;
  return r;
}

std::string QualityReport::to_json() const {
  std::ostringstream os;
  os << "{\"scheme\":\"" << scheme << "\",\"mean_ssim_db\":" << mean_ssim_db
     << ",\"mean_psnr_db\":" << mean_psnr_db << ",\"mean_delay_ms\":" << mean_delay_ms
     << ",\"p98_delay_ms\":" << p98_delay_ms << ",\"non_rendered_frac\":" << non_rendered_frac
     << ",\"stalls_per_s\":" << stalls_per_s << ",\"stall_ratio\":" << stall_ratio << "}";
  return os.str();
}

std::string QualityReport::csv_header() {
  return "scheme,mean_ssim_db,mean_psnr_db,mean_delay_ms,p98_delay_ms,non_rendered_frac,"
         "stalls_per_s,stall_ratio";
}

std::string QualityReport::to_csv_row() const {
  std::ostringstream os;
  os << scheme << "," << mean_ssim_db << "," << mean_psnr_db << "," << mean_delay_ms << ","
     << p98_delay_ms << "," << non_rendered_frac << "," << stalls_per_s << "," << stall_ratio;
  return os.str();
}

}  // namespace shardcast
