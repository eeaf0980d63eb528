// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include "shardcast/wire.hpp"

#include "shardcast/entropy.hpp"

namespace shardcast {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>((v >> s) & 0xff));
}

struct Cursor {
  const uint8_t* data;
  size_t len;
  size_t pos = 0;

  uint8_t u8() {
    if (pos + 1 > len) throw ParseError("packet: truncated header");
    return data[pos++];
  }
  uint16_t u16() {
    if (pos + 2 > len) throw ParseError("packet: truncated header");
    uint16_t v = static_cast<uint16_t>(data[pos] << 8 | data[pos + 1]);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    if (pos + 4 > len) throw ParseError("packet: truncated header");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data[pos + static_cast<size_t>(i)];
    pos += 4;
    return v;
  }
  uint64_t u64() {
    if (pos + 8 > len) throw ParseError("packet: truncated header");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | data[pos + static_cast<size_t>(i)];
    pos += 8;
    return v;
  }
};

}  // namespace

std::vector<uint8_t> serialize_packet(const Packet& p) {
  const PacketHeader& h = p.header;
  if (h.model_bytes.size() > kModelHeaderBudget) {
    throw ValidationError("packet: model header exceeds 64 bytes");
  }
  if (p.payload.size() > 0xffff) throw ValidationError("packet: payload too large");

  std::vector<uint8_t> out;
  out.reserve(p.wire_size());
  out.push_back(kWireMagic);
  out.push_back(kWireVersion);
  out.push_back(static_cast<uint8_t>(h.scheme));
  put_u32(out, h.frame_id);
  uint8_t fb = h.is_predicted ? 0x01 : 0x00;
  if (h.is_predicted) {
    if (h.reference_offset < 1 || h.reference_offset > 128) {
      throw ValidationError("packet: reference offset must be 1..128");
    }
    fb = static_cast<uint8_t>(fb | ((h.reference_offset - 1) << 1));
  }
  out.push_back(fb);
  put_u16(out, h.packet_index);
  put_u16(out, h.packet_count);
  out.push_back(static_cast<uint8_t>((static_cast<uint8_t>(h.tensor.kind) << 4) | (h.tensor.rung & 0x0f)));
  out.push_back(h.tensor.channels);
  put_u16(out, h.tensor.rows);
  put_u16(out, h.tensor.cols);
  put_u16(out, h.tensor.group_start);
  put_u32(out, h.map.m);
  put_u16(out, h.map.n);
  put_u16(out, h.map.p);
  out.push_back(static_cast<uint8_t>(h.model_bytes.size()));
  out.insert(out.end(), h.model_bytes.begin(), h.model_bytes.end());
  put_u16(out, static_cast<uint16_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

Packet parse_packet(const uint8_t* data, size_t len) {
  Cursor c{data, len};
  if (c.u8() != kWireMagic) throw ParseError("packet: bad magic");
  if (c.u8() != kWireVersion) throw ParseError("packet: unsupported version");

  Packet p;
  PacketHeader& h = p.header;
  uint8_t scheme = c.u8();
  if (scheme > 3) throw ParseError("packet: unknown scheme");
  h.scheme = static_cast<Scheme>(scheme);
  h.frame_id = c.u32();
  uint8_t fb = c.u8();
  h.is_predicted = fb & 0x01;
  h.reference_offset = h.is_predicted ? static_cast<uint8_t>((fb >> 1) + 1) : 0;
  h.packet_index = c.u16();
  h.packet_count = c.u16();
  if (h.packet_index >= h.packet_count) throw ParseError("packet: index out of range");

  uint8_t kr = c.u8();
  uint8_t kind = kr >> 4;
  if (kind > 4) throw ParseError("packet: unknown tensor kind");
  h.tensor.kind = static_cast<WireTensorKind>(kind);
  h.tensor.rung = kr & 0x0f;
  if (h.tensor.rung > 10) throw ParseError("packet: rung out of range");
  h.tensor.channels = c.u8();
  h.tensor.rows = c.u16();
  h.tensor.cols = c.u16();
  h.tensor.group_start = c.u16();
  if (h.tensor.group_start > h.packet_index) throw ParseError("packet: group start after index");
  h.map.m = c.u32();
  h.map.n = c.u16();
  h.map.p = c.u16();

  uint8_t model_len = c.u8();
  if (model_len > kModelHeaderBudget) throw ParseError("packet: model header too long");
  if (c.pos + model_len > len) throw ParseError("packet: truncated model");
  h.model_bytes.assign(data + c.pos, data + c.pos + model_len);
  c.pos += model_len;

  uint16_t payload_len = c.u16();
  if (c.pos + payload_len != len) throw ParseError("packet: payload length mismatch");
  p.payload.assign(data + c.pos, data + c.pos + payload_len);
  return p;
}

std::vector<uint8_t> serialize_feedback(const Feedback& fb) {
  if (fb.received.size() > 0xffff) throw ValidationError("feedback: bitmap too long");
  std::vector<uint8_t> out;
  put_u32(out, fb.frame_id);
  put_u16(out, static_cast<uint16_t>(fb.received.size()));
  uint8_t acc = 0;
  int bits = 0;
  for (bool b : fb.received) {
    acc = static_cast<uint8_t>(acc << 1 | (b ? 1 : 0));
    if (++bits == 8) {
      out.push_back(acc);
      acc = 0;
      bits = 0;
    }
  }
  if (bits > 0) out.push_back(static_cast<uint8_t>(acc << (8 - bits)));
  put_u64(out, fb.decode_time_us);
  return out;
}

Feedback parse_feedback(const uint8_t* data, size_t len) {
  Cursor c{data, len};
  Feedback fb;
  fb.frame_id = c.u32();
  uint16_t count = c.u16();
  size_t bytes = (static_cast<size_t>(count) + 7) / 8;
  if (c.pos + bytes + 8 != len) throw ParseError("feedback: length mismatch");
  fb.received.resize(count);
  for (uint16_t i = 0; i < count; ++i) {
    uint8_t byte = data[c.pos + i / 8];
    fb.received[i] = (byte >> (7 - i % 8)) & 1;
  }
  c.pos += bytes;
  fb.decode_time_us = c.u64();
  return fb;
}

}  // namespace shardcast
