// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <cstdint>
#include <vector>

#include "shardcast/util.hpp"

namespace shardcast {

// Transport schemes sharing the wire format.
enum class Scheme : uint8_t { kShard = 0, kFec = 1, kSvc = 2, kSkip = 3 };

constexpr uint8_t kWireMagic = 0xc5;
constexpr uint8_t kWireVersion = 0x01;
constexpr int kDefaultMtu = 1200;

// Wire tensor kinds. kIPatchWire marks the refresh-patch group; its tensor
// decodes as an intra tensor over the region derived from the frame id.
enum class WireTensorKind : uint8_t {
  kMotion = 0,
  kResidual = 1,
  kIntra = 2,
  kOpaque = 3,  // monolithic frame bitstream chunk (fec/svc/skip schemes)
  kIPatch = 4,
};

// Fixed 31-byte header (big-endian), followed by the model bytes and the
// entropy-coded payload:
//
//   [0]     magic 0xC5
//   [1]     version 0x01
//   [2]     scheme
//   [3:7]   frame_id u32
//   [7]     frame byte: bit0 = kind (0 I / 1 P), bits1-7 = reference offset-1
//   [8:10]  packet_index u16
//   [10:12] packet_count u16
//   [12:20] tensor descriptor:
//             [12] kind<<4 | rung
//             [13] channels
//             [14:16] rows u16      (I-patch: block count)
//             [16:18] cols u16      (I-patch: the refresh period k)
//             [18:20] group_start u16 (packet_index of the group's first packet)
//   [20:28] map params: m u32, n u16, p u16
//             (opaque chunks reuse: m = blob bytes, n = k source, p = r parity)
//   [28]    model byte count (0..64)
//   [29:..] model bytes
//   [..+2]  payload byte count u16
//   [....]  payload
struct TensorDescriptor {
  WireTensorKind kind = WireTensorKind::kResidual;
  uint8_t rung = 0;
  uint8_t channels = 0;
  uint16_t rows = 0;
  uint16_t cols = 0;
  uint16_t group_start = 0;
  bool operator==(const TensorDescriptor&) const = default;
};

struct MapParams {
  uint32_t m = 0;
  uint16_t n = 0;
  uint16_t p = 0;
  bool operator==(const MapParams&) const = default;
};

struct PacketHeader {
  Scheme scheme = Scheme::kShard;
  uint32_t frame_id = 0;
  bool is_predicted = false;
  uint8_t reference_offset = 1;  // frames back to the reference (P only)
  uint16_t packet_index = 0;
  uint16_t packet_count = 0;
  TensorDescriptor tensor;
  MapParams map;
  std::vector<uint8_t> model_bytes;
  bool operator==(const PacketHeader&) const = default;
};

struct Packet {
  PacketHeader header;
  std::vector<uint8_t> payload;
  bool operator==(const Packet&) const = default;

  size_t wire_size() const { return 31 + header.model_bytes.size() + payload.size(); }
};

constexpr size_t kFixedHeaderBytes = 31;

std::vector<uint8_t> serialize_packet(const Packet& p);
Packet parse_packet(const uint8_t* data, size_t len);
inline Packet parse_packet(const std::vector<uint8_t>& bytes) {
  return parse_packet(bytes.data(), bytes.size());
}

// Receiver -> sender report, sent once per decoded (or abandoned) frame:
//   [0:4] frame_id u32, [4:6] packet_count u16, ceil(count/8) bitmap bytes
//   (MSB first), [..+8] decode timestamp u64 (microseconds).
struct Feedback {
  uint32_t frame_id = 0;
  std::vector<bool> received;
  uint64_t decode_time_us = 0;

  // An empty bitmap marks total loss (the receiver saw nothing), so it is
  // never complete.
  bool complete() const {
    if (received.empty()) return false;
    for (bool b : received) {
      if (!b) return false;
    }
    return true;
  }
  size_t received_count() const {
    size_t n = 0;
    for (bool b : received) n += b;
    return n;
  }
  bool operator==(const Feedback&) const = default;
};

std::vector<uint8_t> serialize_feedback(const Feedback& fb);
Feedback parse_feedback(const uint8_t* data, size_t len);
inline Feedback parse_feedback(const std::vector<uint8_t>& bytes) {
  return parse_feedback(bytes.data(), bytes.size());
}

}  // namespace shardcast
