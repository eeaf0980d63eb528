// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "shardcast/fec.hpp"
#include "shardcast/util.hpp"
#include "shardcast/wire.hpp"

using namespace shardcast;

namespace {

Packet random_wire_packet(Rng& rng) {
  Packet p;
  p.header.scheme = static_cast<Scheme>(rng.next_below(4));
  p.header.frame_id = static_cast<uint32_t>(rng.next_u64());
  p.header.is_predicted = rng.next_below(2) == 1;
  p.header.reference_offset =
      p.header.is_predicted ? static_cast<uint8_t>(1 + rng.next_below(128)) : 0;
  p.header.packet_count = static_cast<uint16_t>(2 + rng.next_below(400));
  p.header.packet_index = static_cast<uint16_t>(rng.next_below(p.header.packet_count));
  p.header.tensor.kind = static_cast<WireTensorKind>(rng.next_below(5));
  p.header.tensor.rung = static_cast<uint8_t>(rng.next_below(11));
  p.header.tensor.channels = static_cast<uint8_t>(1 + rng.next_below(224));
  p.header.tensor.rows = static_cast<uint16_t>(rng.next_u64());
  p.header.tensor.cols = static_cast<uint16_t>(rng.next_u64());
  p.header.tensor.group_start = static_cast<uint16_t>(rng.next_below(p.header.packet_index + 1));
  p.header.map.m = static_cast<uint32_t>(rng.next_u64());
  p.header.map.n = static_cast<uint16_t>(rng.next_u64());
  p.header.map.p = static_cast<uint16_t>(rng.next_u64());
  p.header.model_bytes.resize(rng.next_below(65));
  for (auto& b : p.header.model_bytes) b = static_cast<uint8_t>(rng.next_u64());
  p.payload.resize(rng.next_below(1100));
  for (auto& b : p.payload) b = static_cast<uint8_t>(rng.next_u64());
  return p;
}

}  // namespace

TEST_CASE("packet header round trip is the identity") {
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    Packet p = random_wire_packet(rng);
    auto bytes = serialize_packet(p);
    CHECK(bytes.size() == p.wire_size());
    Packet back = parse_packet(bytes);
    CHECK(back == p);
  }
}

TEST_CASE("wire layout golden bytes") {
  Packet p;
  p.header.scheme = Scheme::kShard;
  p.header.frame_id = 0x01020304;
  p.header.is_predicted = true;
  p.header.reference_offset = 2;  // frame byte: ((2-1)<<1) | 1 = 0x03
  p.header.packet_index = 0x0005;
  p.header.packet_count = 0x0010;
  p.header.tensor.kind = WireTensorKind::kResidual;  // 1
  p.header.tensor.rung = 9;                          // byte: 0x19
  p.header.tensor.channels = 64;
  p.header.tensor.rows = 0x0102;
  p.header.tensor.cols = 0x0001;
  p.header.tensor.group_start = 0x0002;
  p.header.map.m = 0x00011000;
  p.header.map.n = 0x000d;
  p.header.map.p = 0x0011;
  p.header.model_bytes = {0xaa, 0xbb};
  p.payload = {0xde, 0xad};

  std::vector<uint8_t> expect = {
      0xc5, 0x01, 0x00, 0x01, 0x02, 0x03, 0x04, 0x03, 0x00, 0x05, 0x00, 0x10, 0x19,
      0x40, 0x01, 0x02, 0x00, 0x01, 0x00, 0x02, 0x00, 0x01, 0x10, 0x00, 0x00, 0x0d,
      0x00, 0x11, 0x02, 0xaa, 0xbb, 0x00, 0x02, 0xde, 0xad};
  CHECK(serialize_packet(p) == expect);
}

TEST_CASE("fuzzed packets never crash the parser") {
  Rng rng(99);
  int parsed = 0;
  for (int i = 0; i < 5000; ++i) {
    std::vector<uint8_t> bytes(rng.next_below(200));
    for (auto& b : bytes) b = static_cast<uint8_t>(rng.next_u64());
    try {
      Packet p = parse_packet(bytes);
      ++parsed;
      (void)p;
    } catch (const ParseError&) {
    }
  }
  CHECK(parsed < 100);  // almost everything random must be rejected
}

TEST_CASE("bit-flip fuzz on valid packets never crashes") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    Packet p = random_wire_packet(rng);
    auto bytes = serialize_packet(p);
    bytes[rng.next_below(bytes.size())] ^= static_cast<uint8_t>(1 << rng.next_below(8));
    try {
      parse_packet(bytes);
    } catch (const ParseError&) {
    }
  }
}

TEST_CASE("feedback round trip with odd bitmap lengths") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    Feedback fb;
    fb.frame_id = static_cast<uint32_t>(rng.next_u64());
    fb.received.resize(rng.next_below(70));
    for (size_t j = 0; j < fb.received.size(); ++j) fb.received[j] = rng.next_below(2) == 1;
    fb.decode_time_us = rng.next_u64();
    auto bytes = serialize_feedback(fb);
    CHECK(parse_feedback(bytes) == fb);
  }
}

TEST_CASE("feedback layout: frame_id, count, MSB-first bitmap, timestamp") {
  Feedback fb;
  fb.frame_id = 7;
  fb.received = {true, true, true, false};  // 1110 -> 0xe0
  fb.decode_time_us = 0x0102030405060708ULL;
  auto bytes = serialize_feedback(fb);
  std::vector<uint8_t> expect = {0x00, 0x00, 0x00, 0x07, 0x00, 0x04, 0xe0,
                                 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08};
  CHECK(bytes == expect);
}

// --- GF(256) / Reed-Solomon ------------------------------------------------------

TEST_CASE("gf256 inverses multiply to one") {
  for (int a = 1; a < 256; ++a) {
    CHECK(gf256::mul(static_cast<uint8_t>(a), gf256::inv(static_cast<uint8_t>(a))) == 1);
  }
}

TEST_CASE("reed-solomon k=10 r=5 recovers from any 10 of 15") {
  ReedSolomon rs(10, 5);
  Rng rng(17);
  std::vector<std::vector<uint8_t>> source(10, std::vector<uint8_t>(100));
  for (auto& s : source) {
    for (auto& b : s) b = static_cast<uint8_t>(rng.next_u64());
  }
  auto parity = rs.parity(source);
  REQUIRE(parity.size() == 5);

  for (int trial = 0; trial < 100; ++trial) {
    // choose 10 survivors of the 15 shards
    std::vector<int> order(15);
    for (int i = 0; i < 15; ++i) order[static_cast<size_t>(i)] = i;
    for (size_t i = 15; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);

    std::vector<std::optional<std::vector<uint8_t>>> shards(15);
    for (int i = 0; i < 10; ++i) {
      int idx = order[static_cast<size_t>(i)];
      shards[static_cast<size_t>(idx)] = idx < 10 ? source[static_cast<size_t>(idx)]
                                                  : parity[static_cast<size_t>(idx - 10)];
    }
    auto recovered = rs.reconstruct(shards);
    CHECK(recovered == source);
  }
}

TEST_CASE("reed-solomon fails below k shards (MDS bound)") {
  ReedSolomon rs(10, 5);
  std::vector<std::vector<uint8_t>> source(10, std::vector<uint8_t>(8, 0x5a));
  auto parity = rs.parity(source);
  std::vector<std::optional<std::vector<uint8_t>>> shards(15);
  for (int i = 0; i < 9; ++i) shards[static_cast<size_t>(i)] = source[static_cast<size_t>(i)];
  CHECK_THROWS_AS(rs.reconstruct(shards), ValidationError);
}

TEST_CASE("reed-solomon property: random (k, r, erasures)") {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    int k = 1 + static_cast<int>(rng.next_below(24));
    int r = 1 + static_cast<int>(rng.next_below(12));
    size_t len = 1 + rng.next_below(64);
    ReedSolomon rs(k, r);
    std::vector<std::vector<uint8_t>> source(static_cast<size_t>(k), std::vector<uint8_t>(len));
    for (auto& s : source) {
      for (auto& b : s) b = static_cast<uint8_t>(rng.next_u64());
    }
    auto parity = rs.parity(source);

    std::vector<int> order(static_cast<size_t>(k + r));
    for (int i = 0; i < k + r; ++i) order[static_cast<size_t>(i)] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
    std::vector<std::optional<std::vector<uint8_t>>> shards(static_cast<size_t>(k + r));
    for (int i = 0; i < k; ++i) {
      int idx = order[static_cast<size_t>(i)];
      shards[static_cast<size_t>(idx)] =
          idx < k ? source[static_cast<size_t>(idx)] : parity[static_cast<size_t>(idx - k)];
    }
    CHECK(rs.reconstruct(shards) == source);
  }
}

TEST_CASE("fec redundancy controller: floor, window, cap") {
  FecRateController ctl(0.1, 0.5);
  // zero loss for 2 s -> floor
  for (int i = 0; i < 50; ++i) ctl.observe(i * 40000, 0.0);
  CHECK(ctl.redundancy(2000000) == doctest::Approx(0.1));
  // a burst dominates while inside the window
  ctl.observe(2100000, 0.3);
  CHECK(ctl.redundancy(2200000) == doctest::Approx(0.3));
  // extreme loss clamps at the cap
  ctl.observe(2300000, 0.9);
  CHECK(ctl.redundancy(2400000) == doctest::Approx(0.5));
  // and is forgotten once it leaves the 2 s window
  CHECK(ctl.redundancy(4400001) == doctest::Approx(0.1));
}

TEST_CASE("parity_for matches the parity-fraction-of-total definition") {
  CHECK(FecRateController::parity_for(10, 0.5) == 10);   // r/(k+r) = 0.5
  CHECK(FecRateController::parity_for(10, 1.0 / 3.0) == 5);
  CHECK(FecRateController::parity_for(10, 0.1) == 2);    // ceil(10/9)
  CHECK(FecRateController::parity_for(1, 0.5) == 1);
}
