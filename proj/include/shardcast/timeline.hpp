// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace shardcast {

enum class PacketEventType : uint8_t { kSend, kDrop, kDeliver, kFeedback, kResendRequest };

struct PacketEvent {
  int64_t t_us = 0;
  PacketEventType type = PacketEventType::kSend;
  uint32_t frame_id = 0;
  uint16_t packet_index = 0;
  uint32_t size_bytes = 0;
};

// One row per encoded frame; the measurement basis for every QoE metric.
struct FrameRecord {
  uint32_t frame_id = 0;
  bool is_predicted = false;
  int rung = -1;
  bool overshoot = false;          // even the coarsest rung exceeded the budget
  int64_t encode_start_us = -1;
  int64_t first_send_us = -1;
  int64_t last_send_us = -1;
  uint32_t packets_total = 0;
  uint32_t packets_received = 0;   // at decode trigger
  uint32_t bytes_sent = 0;
  int64_t decode_time_us = -1;     // -1: never decoded
  bool rendered = false;           // decoded and displayed
  bool undecodable = false;        // no packet subset sufficed
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
  double ssim_db = std::numeric_limits<double>::quiet_NaN();

  int64_t frame_delay_us() const { return decode_time_us - encode_start_us; }
};

struct SessionTimeline {
  int64_t duration_us = 0;
  int fps = 25;
  std::string scheme;
  std::vector<PacketEvent> events;
  std::vector<FrameRecord> frames;
  uint64_t packets_sent = 0;
  uint64_t packets_dropped = 0;
  uint64_t packets_delivered = 0;
  uint64_t malformed_packets = 0;

  FrameRecord& frame(uint32_t frame_id);

  // JSON-lines event log, one event per line.
  void write_events_jsonl(std::ostream& out) const;
  // Per-frame CSV with a header row.
  void write_frames_csv(std::ostream& out) const;
};

const char* to_string(PacketEventType t);

}  // namespace shardcast
